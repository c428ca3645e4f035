use sampling_rd::distortion::{fixed_set_instance, DistortionTable};
use sampling_rd::oracle::{brute_force_rate, compare_with_brute_force, mc_expected_distortion, seeded_instance, COMPARISON_FRACTIONS};
use sampling_rd::prob::{binary_entropy, Kernel, SubsetIndex};
use sampling_rd::problem::{example1, example2};
use sampling_rd::sampler::PointMassSampler;
use sampling_rd::solver::{prune_dominated, RdInstance};
use sampling_rd::srdf::{mrs_informed_srdf, SrdfOptions};

const MC_SEED: u64 = 42;

fn one(i: usize) -> SubsetIndex {
    SubsetIndex::from_one_based(&[i]).unwrap()
}

#[test]
fn brute_force_tracks_the_binary_rate_distortion_function() {
    let inst = RdInstance::new(vec![0.5, 0.5], DistortionTable::hamming(2)).unwrap();
    let grid = [0.1, 0.2, 0.3];
    for p in brute_force_rate(&inst, &grid, 40).unwrap() {
        let exact = 1.0 - binary_entropy(p.delta).unwrap();
        assert!(p.rate >= exact - 1e-12 && p.rate - exact <= 0.02, "{} vs {exact}", p.rate);
    }
}

#[test]
fn brute_force_on_a_point_mass_source() {
    let rho = DistortionTable::new(
        sampling_rd::prob::ProductSet::new(vec![2]),
        sampling_rd::prob::ProductSet::new(vec![3]),
        vec![Some(0.7), Some(0.2), Some(0.9), Some(0.0), Some(0.0), Some(0.0)],
    )
    .unwrap();
    let inst = RdInstance::new(vec![1.0, 0.0], rho).unwrap();
    for q in [1, 5, 40] {
        let pts = brute_force_rate(&inst, &[0.2, 0.5], q).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|p| p.rate.abs() < 1e-12));
        assert!(brute_force_rate(&inst, &[0.1], q).unwrap().is_empty());
    }
}

#[test]
fn brute_force_on_the_erasure_example() {
    let pr = example1();
    let (inst, kept) = prune_dominated(&fixed_set_instance(&pr.pmf, &pr.distortion, &one(1)).unwrap()).unwrap();
    assert_eq!(kept.len(), 3);
    let grid: Vec<f64> = (1..10).map(|i| 0.5 + 0.1 * i as f64).collect();
    for p in brute_force_rate(&inst, &grid, 40).unwrap() {
        assert!((p.rate - (1.5 - p.delta)).abs() <= 0.02, "R({}) = {}", p.delta, p.rate);
    }
}

#[test]
fn oracle_bounds_the_solver_from_above() {
    for seed in [1, 2] {
        for i in 0..6 {
            let inst = seeded_instance(seed, i).unwrap();
            for c in compare_with_brute_force(&inst, 40, &COMPARISON_FRACTIONS, 1e-10, 5000).unwrap() {
                assert!(c.excess() >= -1e-6 && c.excess() <= 0.02, "seed {seed} instance {i}: {c:?}");
            }
        }
    }
}

#[test]
fn pruning_keeps_the_curve() {
    for i in 0..6 {
        let inst = seeded_instance(5, i).unwrap();
        let (pruned, _) = prune_dominated(&inst).unwrap();
        let grid: Vec<f64> = COMPARISON_FRACTIONS.iter().map(|f| f * inst.domain().delta_max).collect();
        let a = brute_force_rate(&inst, &grid, 20).unwrap();
        let b = brute_force_rate(&pruned, &grid, 20).unwrap();
        for (x, y) in a.iter().zip(&b) {
            // pruned grid kernels cover the originals after merging columns
            assert!(y.rate <= x.rate + 1e-12);
        }
    }
}

#[test]
fn monte_carlo_matches_the_parity_sampler_witness() {
    let pr = example2(0.1, 0.5).unwrap();
    let res = mrs_informed_srdf(&pr.pmf, &pr.distortion, 1, &SrdfOptions::default()).unwrap();
    let parity = PointMassSampler::from_subsets(2, 1, &[one(1), one(2), one(2), one(1)]).unwrap();
    let sampler = parity.to_randomized();
    let target = 0.05;
    let mut mean = 0.0;
    let mut var = 0.0;
    for (tag, w) in res.mixture_at(target).unwrap() {
        let point = res.point(tag);
        let kernels: Vec<Kernel> = sampler
            .subsets()
            .iter()
            .map(|a| point.branches.iter().find(|b| b.subset.as_ref() == Some(a)).unwrap().kernel.clone())
            .collect();
        let (m, se) = mc_expected_distortion(&pr.pmf, &pr.distortion, &sampler, &kernels, 1_000_000, MC_SEED).unwrap();
        mean += w * m;
        var += w * w * se * se;
    }
    let se = var.sqrt();
    assert!(se > 0.0);
    assert!((mean - target).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn monte_carlo_of_a_constant_distortion_is_exact() {
    let pr = example2(0.1, 0.5).unwrap();
    let h = PointMassSampler::constant(2, 4, &one(1)).unwrap().to_randomized();
    // y = (x1, 0): an error exactly when x2 = 1, which has probability 1/2
    let k1 = Kernel::new(2, 4, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
    let k2 = Kernel::constant(2, 4, 0);
    let (m, se) = mc_expected_distortion(&pr.pmf, &pr.distortion, &h, &[k1.clone(), k2.clone()], 10_000, 1).unwrap();
    assert!(se > 0.0 && (m - 0.5).abs() <= 4.0 * se, "{m} ± {se}");

    let zero = DistortionTable::from_fn(pr.pmf.shape().clone(), pr.distortion.repro().clone(), |_, _| Some(0.25)).unwrap();
    let (m, se) = mc_expected_distortion(&pr.pmf, &zero, &h, &[k1, k2], 10_000, 1).unwrap();
    assert_eq!((m, se), (0.25, 0.0));
}

#[test]
fn monte_carlo_standard_error_shrinks_by_root_two_per_doubling() {
    let pr = example2(0.1, 0.5).unwrap();
    let h = PointMassSampler::constant(2, 4, &one(2)).unwrap().to_randomized();
    let k = Kernel::new(2, 4, vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]).unwrap();
    let kernels = [Kernel::constant(2, 4, 0), k];
    for seed in 0..100 {
        let (_, a) = mc_expected_distortion(&pr.pmf, &pr.distortion, &h, &kernels, 20_000, seed).unwrap();
        let (_, b) = mc_expected_distortion(&pr.pmf, &pr.distortion, &h, &kernels, 40_000, seed).unwrap();
        let ratio = b / a;
        assert!((0.6..=0.85).contains(&ratio), "seed {seed}: {ratio}");
    }
}

#[test]
fn monte_carlo_does_not_depend_on_the_thread_count() {
    let pr = example2(0.1, 0.5).unwrap();
    let h = PointMassSampler::constant(2, 4, &one(1)).unwrap().to_randomized();
    let kernels = [Kernel::new(2, 4, vec![0.25; 8]).unwrap(), Kernel::constant(2, 4, 3)];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_expected_distortion(&pr.pmf, &pr.distortion, &h, &kernels, 300_000, 3).unwrap())
    };
    assert_eq!(run(1), run(4));
}
