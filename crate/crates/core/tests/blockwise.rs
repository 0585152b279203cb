use blockmt::blockwise::{
    bivariate_f_test, bwa_critical_value, degeneracy, run_block_analysis, srw_critical_value,
    summarize_block, test_blocks, truncated_mean, validate_partition, AnalysisPlan, Block,
    BlockData, BlockPartition, BlockTest, Degeneracy, FConstant, GlobalRegion, Summary,
    SummaryValue,
};
use blockmt::mtp::{reject, PValueVector};
use blockmt::stats::{normal_sf, Alternative, RngStream};
use blockmt::{Error, Execution, ProcedureKind};
use proptest::prelude::*;

fn plan(summary: Summary, method: ProcedureKind, alpha: f64) -> AnalysisPlan {
    AnalysisPlan {
        summary,
        test: BlockTest::OneSampleZ {
            mu0: 0.0,
            sigma0: 1.0,
        },
        method,
        alpha,
    }
}

proptest! {
    #[test]
    fn critical_value_decreases_in_block_size(alpha in 0.001f64..0.2, m in 1usize..500, b in 1usize..200) {
        let c = bwa_critical_value(alpha, m, b, 0.0, 1.0).unwrap();
        let c_next = bwa_critical_value(alpha, m, b + 1, 0.0, 1.0).unwrap();
        prop_assert!(c_next < c);
        let c_more = bwa_critical_value(alpha, m + 1, b, 0.0, 1.0).unwrap();
        prop_assert!(c_more > c);
    }

    #[test]
    fn block_threshold_below_region_threshold(alpha in 0.001f64..0.2, m in 1usize..300, b in 1usize..20, extra in 0usize..3000) {
        let big_m = (m * b).max(m + extra);
        let bwa = bwa_critical_value(alpha, m, b, 0.0, 1.0).unwrap();
        let srw = srw_critical_value(alpha, big_m, 0.0, 1.0).unwrap();
        if b == 1 && m == big_m {
            prop_assert_eq!(bwa, srw);
        } else {
            prop_assert!(bwa < srw, "bwa {bwa} srw {srw}");
        }
    }

    #[test]
    fn unit_blocks_reproduce_region_wise_decisions(
        values in prop::collection::vec(-2.0f64..6.0, 1..80),
        alpha in 0.01f64..0.2,
        method_idx in 0usize..6,
    ) {
        let method = ProcedureKind::ALL[method_idx];
        let region = GlobalRegion::new(values.clone()).unwrap();
        let part = BlockPartition::contiguous(values.len(), 1);
        let a = run_block_analysis(BlockData::OneSample(&region), &part, &plan(Summary::Mean, method, alpha), None, Execution::Sequential).unwrap();
        let p: Vec<f64> = values.iter().map(|&x| normal_sf(x).unwrap()).collect();
        let direct = reject(&PValueVector::new(p).unwrap(), method, alpha).unwrap();
        prop_assert_eq!(a.rejected, direct);
    }

    #[test]
    fn relabelling_regions_changes_nothing(
        values in prop::collection::vec(-3.0f64..5.0, 12..60),
        b in 2usize..6,
        seed in any::<u64>(),
    ) {
        let n = values.len() - values.len() % b;
        let values = &values[..n];
        let region = GlobalRegion::new(values.to_vec()).unwrap();
        let part = BlockPartition::contiguous(n, b);
        let mut rng = RngStream::new(seed);
        let mut new_index: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            new_index.swap(i, rng.below(i + 1));
        }
        let mut moved = vec![0.0; n];
        for (old, &new) in new_index.iter().enumerate() {
            moved[new] = values[old];
        }
        let moved_region = GlobalRegion::new(moved).unwrap();
        let moved_part = part.permuted(&new_index);
        prop_assert!(validate_partition(&moved_region, &moved_part).is_ok());
        for summary in [Summary::Mean, Summary::Median, Summary::Huber] {
            let p = plan(summary, ProcedureKind::Holm, 0.05);
            let a = run_block_analysis(BlockData::OneSample(&region), &part, &p, None, Execution::Sequential).unwrap();
            let b2 = run_block_analysis(BlockData::OneSample(&moved_region), &moved_part, &p, None, Execution::Parallel).unwrap();
            prop_assert_eq!(&a.rejected, &b2.rejected);
            for (x, y) in a.outcomes.iter().zip(&b2.outcomes) {
                // members are summed in a different order
                let (sx, sy) = (x.test.summary.unwrap().scalar().unwrap(), y.test.summary.unwrap().scalar().unwrap());
                prop_assert!((sx - sy).abs() <= 1e-12, "{sx} vs {sy}");
                prop_assert_eq!(x.rejected, y.rejected);
            }
        }
    }

    #[test]
    fn truncated_mean_is_a_fraction(values in prop::collection::vec(-5.0f64..5.0, 1..50), threshold in -2.0f64..2.0) {
        let t = truncated_mean(&values, threshold);
        prop_assert!((0.0..=1.0).contains(&t));
        let count = values.iter().filter(|&&v| v > threshold).count();
        prop_assert_eq!(t, count as f64 / values.len() as f64);
    }

    #[test]
    fn bivariate_is_symmetric_and_affine_invariant(
        seed in any::<u64>(),
        a11 in 0.5f64..3.0, a12 in -1.0f64..1.0, a21 in -1.0f64..1.0, a22 in 0.5f64..3.0,
        c1 in -10.0f64..10.0, c2 in -10.0f64..10.0,
    ) {
        prop_assume!((a11 * a22 - a12 * a21).abs() > 0.1);
        let mut rng = RngStream::new(seed);
        let mut draw = |shift: f64, n: usize| -> Vec<(f64, f64)> {
            (0..n).map(|_| {
                let z = rng.standard_normal();
                (z + shift, 0.5 * z + rng.standard_normal())
            }).collect()
        };
        let control = draw(0.0, 9);
        let treatment = draw(0.8, 11);
        let f = bivariate_f_test(&control, &treatment, FConstant::Standard).unwrap();
        let swapped = bivariate_f_test(&treatment, &control, FConstant::Standard).unwrap();
        prop_assert_eq!(f.f, swapped.f);
        prop_assert_eq!(f.p_value, swapped.p_value);
        let map = |g: &[(f64, f64)]| -> Vec<(f64, f64)> {
            g.iter().map(|&(x, y)| (a11 * x + a12 * y + c1, a21 * x + a22 * y + c2)).collect()
        };
        let moved = bivariate_f_test(&map(&control), &map(&treatment), FConstant::Standard).unwrap();
        prop_assert!((moved.f - f.f).abs() <= 1e-9 * f.f.max(1.0), "{} vs {}", moved.f, f.f);
    }
}

#[test]
fn bivariate_two_by_two_by_hand() {
    // control mean (1, 2), treatment mean (3, 3)
    let control = [(0.0, 1.0), (2.0, 3.0), (1.0, 2.0)];
    let treatment = [(2.0, 3.0), (4.0, 3.0), (3.0, 3.0)];
    // scatter: control [[2,2],[2,2]], treatment [[2,0],[0,0]] -> [[4,2],[2,2]]
    // pooled S = scatter / 4 = [[1, .5], [.5, .5]], det = 0.25, S^-1 = [[2,-2],[-2,4]]
    // d = (2, 1): dᵀS⁻¹d = 8 - 8 + 4 = 4; T² = 9/6 * 4 = 6; f = 6 * 3 / (2 * 4) = 2.25
    let r = bivariate_f_test(&control, &treatment, FConstant::Standard).unwrap();
    assert!((r.f - 2.25).abs() < 1e-12, "{}", r.f);
    assert_eq!(r.df, (2, 3));
    let printed = bivariate_f_test(&control, &treatment, FConstant::Printed).unwrap();
    assert!((printed.f - 6.0 * 3.0 / 10.0).abs() < 1e-12);
}

#[test]
fn degenerate_covariance_is_classified() {
    let c = [(1.0, 0.5), (2.0, 0.5), (3.0, 0.5)];
    let t = [(2.0, 0.5), (4.0, 0.5)];
    assert_eq!(degeneracy(&c, &t), Some(Degeneracy::Second));
    let line_c = [(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)];
    let line_t = [(4.0, 8.0), (5.0, 10.0)];
    assert_eq!(degeneracy(&line_c, &line_t), Some(Degeneracy::Collinear));
    assert!(matches!(
        bivariate_f_test(&line_c, &line_t, FConstant::Standard),
        Err(Error::Singular { .. })
    ));
}

#[test]
fn bivariate_strategy_falls_back_on_singular_blocks() {
    // every cell positive: the truncated mean is constant 1 in both groups
    let mut rng = RngStream::new(3);
    let mut group = |shift: f64| -> Vec<GlobalRegion> {
        (0..8)
            .map(|_| {
                let v: Vec<f64> = (0..12).map(|_| 5.0 + shift + rng.standard_normal()).collect();
                GlobalRegion::new(v).unwrap()
            })
            .collect()
    };
    let control = group(0.0);
    let treatment = group(1.5);
    let part = BlockPartition::contiguous(12, 4);
    let results = test_blocks(
        BlockData::TwoGroup { control: &control, treatment: &treatment },
        &part,
        Summary::bivariate(),
        BlockTest::BivariateF { constant: FConstant::Standard, alternative: Alternative::Greater },
        Execution::Sequential,
    )
    .unwrap();
    for r in &results {
        let note = r.fallback.as_deref().expect("fallback recorded");
        assert!(note.contains("truncated mean"), "{note}");
        assert!((0.0..=1.0).contains(&r.p_value));
    }
    assert!(results.iter().all(|r| r.p_value < 0.05));
}

#[test]
fn summaries() {
    let v = [1.0, -2.0, 3.0, 0.0];
    assert_eq!(summarize_block(&v, Summary::Mean).unwrap(), SummaryValue::Scalar(0.5));
    assert_eq!(summarize_block(&v, Summary::Median).unwrap(), SummaryValue::Scalar(0.5));
    assert_eq!(summarize_block(&v, Summary::truncated()).unwrap(), SummaryValue::Scalar(0.5));
    assert_eq!(summarize_block(&v, Summary::bivariate()).unwrap(), SummaryValue::Pair(0.5, 0.5));
    assert!(summarize_block(&[], Summary::Mean).is_err());
}

#[test]
fn partition_violations_are_reported() {
    let region = GlobalRegion::with_mask(vec![0.0; 6], vec![true, true, true, true, false, true]).unwrap();
    let good = BlockPartition::new(vec![
        Block { label: "a".into(), members: vec![0, 1] },
        Block { label: "b".into(), members: vec![2, 3, 5] },
    ]);
    let check = validate_partition(&region, &good).unwrap();
    assert_eq!(check.total, 5);
    assert_eq!(check.sizes, vec![2, 3]);

    let bad = BlockPartition::new(vec![
        Block { label: "a".into(), members: vec![0, 1, 4] },
        Block { label: "b".into(), members: vec![1, 3] },
        Block { label: "c".into(), members: vec![] },
    ]);
    let v = validate_partition(&region, &bad).unwrap_err();
    let text = v.to_string();
    assert!(!text.is_empty());
    assert!(run_block_analysis(
        BlockData::OneSample(&region),
        &bad,
        &plan(Summary::Mean, ProcedureKind::Bonferroni, 0.05),
        None,
        Execution::Sequential
    )
    .is_err());
}

#[test]
fn masked_regions_do_not_count() {
    let mut values = vec![0.0; 10];
    values[0] = 2.4;
    let mask: Vec<bool> = (0..10).map(|i| i < 4).collect();
    let region = GlobalRegion::with_mask(values, mask).unwrap();
    let part = BlockPartition::singletons(10, region.mask());
    assert_eq!(part.len(), 4);
    let a = run_block_analysis(
        BlockData::OneSample(&region),
        &part,
        &plan(Summary::Mean, ProcedureKind::Bonferroni, 0.05),
        Some(&[0]),
        Execution::Sequential,
    )
    .unwrap();
    // 2.4 clears the 4-test threshold 2.241 but not the 10-test one, 2.576
    assert_eq!(a.rejected, vec![0]);
    let t = a.table.unwrap();
    assert_eq!((t.m, t.s, t.v), (4, 1, 0));
}
