use dynbo_core::rng::seeded;
use dynbo_core::select::{kmeans, select_sources, select_with_policy, HyperparamArchive, SourcePolicy};
use rand::Rng;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest within-cluster sum of squares over all assignments to `k` non-empty clusters.
fn brute_force(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut used = vec![false; k];
        labels.iter().for_each(|&l| used[l] = true);
        if used.iter().all(|u| *u) {
            let mut cost = 0.0;
            for c in 0..k {
                let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(p, _)| p).collect();
                let dim = members[0].len();
                let mean: Vec<f64> =
                    (0..dim).map(|d| members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64).collect();
                cost += members.iter().map(|m| sq(m, &mean)).sum::<f64>();
            }
            best = best.min(cost);
        }
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

fn blobs(seed: u64, k: usize, per: usize) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    let mut pts = Vec::new();
    for c in 0..k {
        let center = [10.0 * c as f64, 5.0 * (c % 2) as f64];
        for _ in 0..per {
            pts.push(vec![center[0] + rng.gen_range(-1.0..1.0), center[1] + rng.gen_range(-1.0..1.0)]);
        }
    }
    pts
}

#[test]
fn separated_blobs_reach_the_brute_force_optimum() {
    for seed in 0..10 {
        for k in 2..=3 {
            let pts = blobs(seed, k, 3);
            let cl = kmeans(&pts, k, &mut seeded(seed + 100)).unwrap();
            let oracle = brute_force(&pts, k);
            assert!((cl.objective() - oracle).abs() < 1e-9 * oracle.max(1.0), "k={k}: {} vs {oracle}", cl.objective());
        }
    }
}

#[test]
fn lloyd_fixed_point_on_random_points() {
    let mut rng = seeded(5);
    for _ in 0..20 {
        let pts: Vec<Vec<f64>> = (0..9).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let k = rng.gen_range(1..=4);
        let cl = kmeans(&pts, k, &mut rng).unwrap();
        assert!(cl.objective() >= brute_force(&pts, k) - 1e-12);
        for w in cl.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        for (p, &a) in pts.iter().zip(&cl.assignments) {
            let own = sq(p, &cl.centroids[a]);
            assert!(cl.centroids.iter().all(|c| own <= sq(p, c) + 1e-12));
        }
        for c in 0..k {
            assert!(cl.assignments.contains(&c), "cluster {c} empty");
        }
    }
}

#[test]
fn representative_per_cluster() {
    let mut archive = HyperparamArchive::new();
    let rows = [[1.0, 1.0], [1.1, 1.0], [9.0, 2.0], [9.1, 2.0], [5.0, 9.0], [5.0, 9.1]];
    for (i, r) in rows.iter().enumerate() {
        archive.insert(i + 1, r.to_vec()).unwrap();
    }
    for seed in 0..10 {
        let picked = select_sources(&archive, 3, &mut seeded(seed)).unwrap();
        assert_eq!(picked.len(), 3);
        // one step from each pair
        let groups: Vec<usize> = picked.iter().map(|s| (s - 1) / 2).collect();
        assert_eq!(groups, vec![0, 1, 2]);
    }
    assert_eq!(select_with_policy(SourcePolicy::Recent, &archive, 2, None, &mut seeded(0)).unwrap(), vec![5, 6]);
    let near = select_with_policy(SourcePolicy::Similar, &archive, 2, Some(&[9.05, 2.0]), &mut seeded(0)).unwrap();
    assert_eq!(near, vec![3, 4]);
    assert!(select_with_policy(SourcePolicy::Similar, &archive, 2, None, &mut seeded(0)).is_err());
}
