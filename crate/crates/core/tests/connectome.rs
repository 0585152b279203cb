use blockmt::blockwise::validate_layout;
use blockmt::connectome::{
    blocks_from_hierarchy, cell_moments, choose_affected_blocks, connection_density,
    design_histograms, histograms_csv, load_group, parse_affected_blocks, synthesize_controls,
    synthesize_study, synthesize_treatment_group, write_affected_blocks, write_group,
    ConnectivityMatrix, ControlModel, FiberBundle, ParcellationHierarchy, SyntheticPopulation,
    SyntheticStudy,
};
use blockmt::stats::RngStream;
use proptest::prelude::*;

fn lengths() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..200.0, 0..40)
}

proptest! {
    #[test]
    fn density_ignores_fiber_order(lengths in lengths(), sk in 1.0f64..500.0, sl in 1.0f64..500.0, seed in any::<u64>()) {
        let mut shuffled = lengths.clone();
        let mut rng = RngStream::new(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.below(i + 1));
        }
        let a = connection_density(&FiberBundle { lengths, surface_k: sk, surface_l: sl }).unwrap();
        let b = connection_density(&FiberBundle { lengths: shuffled, surface_k: sk, surface_l: sl }).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn density_adds_over_disjoint_fibers(first in lengths(), second in lengths(), sk in 1.0f64..500.0, sl in 1.0f64..500.0) {
        let d = |l: Vec<f64>| connection_density(&FiberBundle { lengths: l, surface_k: sk, surface_l: sl }).unwrap();
        let joint: Vec<f64> = first.iter().chain(&second).copied().collect();
        let (a, b, ab) = (d(first), d(second), d(joint));
        prop_assert!((a + b - ab).abs() <= 1e-12 * ab.max(1.0));
    }

    #[test]
    fn hierarchy_blocks_form_a_partition(seed in any::<u64>(), n in 8usize..60, mid_frac in 0.3f64..1.0, coarse_frac in 0.1f64..1.0, diagonal in any::<bool>()) {
        // strictly coarser levels, so each size names one level
        let mid = ((n as f64 * mid_frac) as usize).clamp(3, n - 1);
        let coarse = ((mid as f64 * coarse_frac) as usize).clamp(2, mid - 1);
        let h = ParcellationHierarchy::synthetic(&[n, mid, coarse], seed).unwrap();
        let blocks = blocks_from_hierarchy(&h, n, coarse, diagonal).unwrap();
        let check = validate_layout(blocks.cell_count(), Some(blocks.mask.as_slice()), &blocks.partition);
        prop_assert!(check.is_ok(), "{:?}", check.err());
        // nested, surjective mappings at every level
        let fine_to_mid = h.nesting(0, 1).unwrap();
        let mid_to_coarse = h.nesting(1, 2).unwrap();
        prop_assert_eq!(fine_to_mid.len(), n);
        let mut seen = vec![false; mid];
        for &p in &fine_to_mid {
            seen[p] = true;
        }
        prop_assert!(seen.iter().all(|&s| s));
        let composed: Vec<usize> = fine_to_mid.iter().map(|&p| mid_to_coarse[p]).collect();
        prop_assert_eq!(composed, h.nesting(0, 2).unwrap());
        let pairs = if diagonal { coarse * (coarse + 1) / 2 } else { coarse * (coarse - 1) / 2 };
        // pairs of parcels with at least one cell between them
        prop_assert!(blocks.partition.len() <= pairs);
        if !diagonal {
            prop_assert_eq!(blocks.partition.len(), pairs);
        }
    }
}

#[test]
fn off_diagonal_block_count() {
    let h = ParcellationHierarchy::synthetic(&[60, 24, 12], 1).unwrap();
    let blocks = blocks_from_hierarchy(&h, 60, 12, false).unwrap();
    assert_eq!(blocks.partition.len(), 66);
    let within: usize = (0..12)
        .map(|p| {
            let s = blocks.parcel_of.iter().filter(|&&q| q == p).count();
            s * (s - 1) / 2
        })
        .sum();
    assert_eq!(blocks.analyzed_cells(), 60 * 59 / 2 - within);
    let with = blocks_from_hierarchy(&h, 60, 12, true).unwrap();
    assert_eq!(with.analyzed_cells(), 60 * 59 / 2);
    for i in [0, 17, 1769] {
        let (k, l) = blocks.cell_coords(i);
        assert_eq!(blocks.cell_index(k, l), i);
        assert_eq!(blocks.cell_index(l, k), i);
    }
}

#[test]
fn hierarchy_text_round_trip() {
    let h = ParcellationHierarchy::synthetic(&[30, 10, 4], 5).unwrap();
    let back = ParcellationHierarchy::parse(&h.to_text()).unwrap();
    assert_eq!(back.sizes(), vec![30, 10, 4]);
    assert_eq!(back.nesting(0, 2).unwrap(), h.nesting(0, 2).unwrap());
}

#[test]
fn treatment_group_is_non_negative_and_centered() {
    let n = 40;
    let model = ControlModel::default();
    let h = ParcellationHierarchy::synthetic(&[n, 16, 8], 2).unwrap();
    let blocks = blocks_from_hierarchy(&h, n, 8, false).unwrap();
    let controls = synthesize_controls(n, 15, &model, 3).unwrap();
    let affected = choose_affected_blocks(&blocks, 0.25, (0.2, 1.0), 4).unwrap();
    let n_t = 15;
    let (treatments, truth) = synthesize_treatment_group(&controls, &blocks, &affected, 1.0, n_t, 5).unwrap();
    assert_eq!(treatments.len(), n_t);
    for t in &treatments {
        for k in 0..n {
            for l in 0..n {
                assert!(t.get(k, l) >= 0.0);
                assert_eq!(t.get(k, l), t.get(l, k));
            }
        }
    }
    let (m_c, s_c) = cell_moments(&controls).unwrap();
    let (m_t, _) = cell_moments(&treatments).unwrap();
    let injected: std::collections::HashSet<usize> = truth.injected_cells.iter().copied().collect();
    let (mut checked, mut outside) = (0usize, 0usize);
    // moments are indexed k·n + l
    let at = |v: &[f64], cell: usize| {
        let (k, l) = blocks.cell_coords(cell);
        v[k * n + l]
    };
    for cell in 0..blocks.cell_count() {
        if injected.contains(&cell) || at(&s_c, cell) == 0.0 {
            continue;
        }
        checked += 1;
        if (at(&m_t, cell) - at(&m_c, cell)).abs() > 3.0 * at(&s_c, cell) / (n_t as f64).sqrt() {
            outside += 1;
        }
    }
    // clamping at 0 pulls means upward, so allow well above the nominal 0.27%
    assert!(checked > 200);
    assert!((outside as f64) / (checked as f64) < 0.02, "{outside}/{checked}");
    // absent cells stay absent
    for cell in 0..blocks.cell_count() {
        if at(&s_c, cell) == 0.0 && at(&m_c, cell) == 0.0 && !injected.contains(&cell) {
            assert_eq!(at(&m_t, cell), 0.0);
        }
    }
}

#[test]
fn injected_cells_follow_the_affected_fraction() {
    let data = synthesize_study(&SyntheticStudy::default()).unwrap();
    assert_eq!(data.truth.affected.len(), 13);
    for (a, &k) in data.truth.affected.iter().zip(&data.truth.injected_per_block) {
        let b = data.blocks.partition.blocks()[a.block].members.len();
        assert_eq!(k, ((a.fraction * b as f64 - 1e-9).ceil() as usize).clamp(1, b));
    }
    let null = synthesize_study(&SyntheticStudy { delta: 0.0, ..SyntheticStudy::default() }).unwrap();
    assert!(null.truth.injected_cells.is_empty());
    assert!(null.truth.affected_blocks.is_empty());
}

#[test]
fn histograms_are_stable_under_seed() {
    let csv = |seed: u64| {
        let data = synthesize_study(&SyntheticStudy { seed, ..SyntheticStudy::default() }).unwrap();
        histograms_csv(&design_histograms(&data.blocks, &data.truth, 8).unwrap())
    };
    assert_eq!(csv(3), csv(3));
    assert_ne!(csv(3), csv(4));
    let data = synthesize_study(&SyntheticStudy::default()).unwrap();
    let hist = design_histograms(&data.blocks, &data.truth, 8).unwrap();
    let total: usize = hist[0].counts.iter().sum();
    assert_eq!(total, data.blocks.partition.len());
    let affected: usize = hist[2].counts.iter().sum();
    assert_eq!(affected, data.truth.affected.len());
}

#[test]
fn population_draws_share_structure() {
    let pop = SyntheticPopulation::new(30, &ControlModel::default(), 8).unwrap();
    let a = pop.draw(5, 1).unwrap();
    let b = pop.draw(5, 2).unwrap();
    assert_ne!(a, b);
    // the same cells are present in every subject of every draw
    for k in 0..30 {
        for l in k + 1..30 {
            let present = a[0].get(k, l) > 0.0 || b[0].get(k, l) > 0.0;
            if !present {
                assert!(a.iter().chain(&b).all(|m| m.get(k, l) == 0.0));
            }
        }
    }
    assert!(pop.density() > 0.0 && pop.density() <= 1.0);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let group = synthesize_controls(12, 3, &ControlModel::default(), 11).unwrap();
    write_group(dir.path(), "control", &group).unwrap();
    let back = load_group(dir.path()).unwrap();
    assert_eq!(back, group);
    let m = ConnectivityMatrix::parse("0,1.5\n1.5,0\n").unwrap();
    assert_eq!(m.get(0, 1), 1.5);
    assert!(ConnectivityMatrix::parse("0,1\n2,0\n").is_err());
    assert!(ConnectivityMatrix::parse("0,-1\n-1,0\n").is_err());

    let data = synthesize_study(&SyntheticStudy::default()).unwrap();
    let text = write_affected_blocks(&data.affected, &data.blocks);
    let parsed = parse_affected_blocks(&text, &data.blocks).unwrap();
    assert_eq!(parsed.len(), data.affected.len());
    for (x, y) in parsed.iter().zip(&data.affected) {
        assert_eq!(x.block, y.block);
        assert_eq!(x.fraction, y.fraction);
    }
}
