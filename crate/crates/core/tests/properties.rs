use bintemp::binning::{bins_by_count, DEFAULT_HIGH_CONF_THRESHOLD};
use bintemp::{BinMethod, BinSpec, CalibrationMap, FitConfig, LogitDataset, MethodTag};
use proptest::prelude::*;

/// Group sizes for `m` sorted samples split into `g` near-equal groups, larger first.
fn group_sizes(m: usize, g: usize) -> Vec<usize> {
    (0..g).map(|i| m / g + usize::from(i < m % g)).collect()
}

fn confidences() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![
            6 => 0.1f64..=1.0,
            2 => 0.999f64..=1.0,
            2 => (2u32..=20).prop_map(|k| k as f64 / 20.0),
        ],
        2..500,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn count_bins_hold_whole_groups(c in confidences(), n in 2usize..40) {
        let mut below: Vec<f64> = c.iter().copied().filter(|&x| x <= DEFAULT_HIGH_CONF_THRESHOLD).collect();
        prop_assume!(below.len() >= n);
        below.sort_by(f64::total_cmp);
        let spec = bins_by_count(&c, n).unwrap();
        let k = spec.n_bins();

        let mut counts = vec![0usize; k];
        for &x in &c {
            counts[spec.assign(x).unwrap()] += 1;
        }
        let above = c.len() - below.len();
        prop_assert_eq!(counts[k - 1], above, "top bin holds exactly the samples above the threshold");

        // every count bin is a run of consecutive groups; runs longer than one need tied boundaries
        let sizes = group_sizes(below.len(), n - 1);
        let mut g = 0;
        let mut start = 0;
        for &count in &counts[..k - 1] {
            let mut taken = 0;
            let mut run = 0;
            while taken < count {
                prop_assert!(g < sizes.len());
                taken += sizes[g];
                g += 1;
                run += 1;
            }
            prop_assert_eq!(taken, count, "bin boundary splits a group");
            let mut end = start;
            for s in &sizes[g - run..g - 1] {
                end += s;
                prop_assert_eq!(below[end - 1], below[end], "merged groups without a tie");
            }
            start += count;
            if run == 1 {
                let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                prop_assert!(count >= *lo && count <= *hi && hi - lo <= 1);
            }
        }
        prop_assert_eq!(g, sizes.len());
    }

    #[test]
    fn maps_never_change_predicted_classes(
        rows in prop::collection::vec(prop::collection::vec(-20.0f64..20.0, 6), 1..100),
        inner in prop::collection::btree_set(1u32..999, 0..12),
        temps in prop::collection::vec(0.05f64..20.0, 13),
    ) {
        let mut edges = vec![0.0];
        edges.extend(inner.iter().map(|&e| e as f64 / 1000.0));
        edges.push(1.0);
        let k = edges.len() - 1;
        let spec = BinSpec::new(edges, BinMethod::ConfidenceInterval).unwrap();
        let map = CalibrationMap {
            method: MethodTag::Bts,
            spec,
            temperatures: temps[..k].to_vec(),
            fallback_temperature: temps[12],
            per_bin_counts: vec![10; k],
            config: FitConfig::default(),
        };
        map.validate().unwrap();
        let n = rows.len();
        let d = LogitDataset::new(6, rows.concat(), vec![0; n], None).unwrap();
        for (raw, cal) in d.raw_predictions().iter().zip(map.apply(&d)) {
            prop_assert_eq!(raw.predicted_class, cal.predicted_class);
        }
    }
}
