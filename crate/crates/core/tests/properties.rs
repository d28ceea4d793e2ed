use lcmil::io::{read_heatmap_csv, write_heatmap_csv};
use lcmil::mil::checkpoint;
use lcmil::mil::MilModel;
use lcmil::morphology::components;
use lcmil::postproc::{morphology_clean, otsu_split, threshold_heatmap, PostprocConfig};
use lcmil::synthgrid::{apply_noise_s1, apply_noise_s2, flip_count};
use lcmil::{AnnotationMask, BinaryGrid, Heatmap, MaskRole, MilPredictor, ModelKind};
use proptest::prelude::*;

fn mask(max_side: usize) -> impl Strategy<Value = BinaryGrid> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), w * h)
            .prop_map(move |cells| BinaryGrid::from_cells(w, h, cells).unwrap())
    })
}

fn mask_pair(max_side: usize) -> impl Strategy<Value = (BinaryGrid, BinaryGrid)> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        (
            prop::collection::vec(any::<bool>(), w * h),
            prop::collection::vec(prop::bool::weighted(0.85), w * h),
        )
            .prop_map(move |(a, b)| {
                (
                    BinaryGrid::from_cells(w, h, a).unwrap(),
                    BinaryGrid::from_cells(w, h, b).unwrap(),
                )
            })
    })
}

fn heatmap(max_side: usize) -> impl Strategy<Value = Heatmap> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::option::weighted(0.8, 0.0..=1.0f64), w * h)
            .prop_map(move |s| Heatmap::new(w, h, s).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cleaned_masks_have_no_small_objects_or_holes(g in mask(30), min in 1usize..40) {
        let cfg = PostprocConfig { min_hole_px: min, min_object_px: min, ..PostprocConfig::default() };
        let out = morphology_clean(&AnnotationMask::new(g, MaskRole::Refined), &cfg).grid;
        prop_assert!(components(&out, true).iter().all(|c| c.area() >= min));
        prop_assert_eq!(morphology_clean(&AnnotationMask::new(out.clone(), MaskRole::Refined), &cfg).grid, out);
    }

    #[test]
    fn thresholding_is_monotone_in_scores(map in heatmap(12), t in 0.0..1.0f64, cell in any::<prop::sample::Index>(), bump in 0.0..1.0f64) {
        let before = threshold_heatmap(&map, t);
        let i = cell.index(map.scores().len());
        let mut scores = map.scores().to_vec();
        if let Some(s) = scores[i] {
            scores[i] = Some((s + bump).min(1.0));
        }
        let raised = Heatmap::new(map.width(), map.height(), scores).unwrap();
        let after = threshold_heatmap(&raised, t);
        prop_assert!(!before.grid.cells()[i] || after.grid.cells()[i]);
    }

    #[test]
    fn otsu_split_separates_two_occupied_bins(a in 0usize..64, b in 0usize..64, na in 1u64..50, nb in 1u64..50) {
        prop_assume!(a != b);
        let mut hist = vec![0u64; 64];
        hist[a] = na;
        hist[b] = nb;
        let k = otsu_split(&hist).unwrap();
        prop_assert!(a.min(b) < k && k <= a.max(b));
        // Ties resolve to the lowest boundary: one past the lower bin.
        prop_assert_eq!(k, a.min(b) + 1);
    }

    #[test]
    fn s1_noise_stays_in_tissue_and_is_seeded((gt, tissue) in mask_pair(20), rho0 in 0.0..=1.0f64, rho1 in 0.0..=1.0f64, seed in any::<u64>()) {
        let gt = AnnotationMask::new(gt.and(&tissue), MaskRole::GroundTruth);
        let a = apply_noise_s1(&gt, &tissue, rho0, rho1, seed).unwrap();
        let b = apply_noise_s1(&gt, &tissue, rho0, rho1, seed).unwrap();
        prop_assert_eq!(&a.grid, &b.grid);
        for c in 0..tissue.len() {
            if !tissue.cells()[c] {
                prop_assert_eq!(a.grid.cells()[c], gt.grid.cells()[c]);
            }
        }
        let flipped_pos = gt.grid.ones().filter(|&c| !a.grid.cells()[c]).count();
        prop_assert_eq!(flipped_pos, flip_count(gt.grid.count(), rho1));
    }

    #[test]
    fn s2_noise_is_within_tissue((gt, tissue) in mask_pair(24), radius in 0usize..4, cut in any::<bool>()) {
        let gt = AnnotationMask::new(gt.and(&tissue), MaskRole::GroundTruth);
        prop_assume!(gt.grid.count() > 0);
        let out = apply_noise_s2(&gt, &tissue, radius, cut).unwrap();
        prop_assert!(out.grid.ones().all(|c| tissue.cells()[c]));
    }

    #[test]
    fn heatmap_csv_round_trips(map in heatmap(10)) {
        let mut buf = Vec::new();
        write_heatmap_csv(&map, &mut buf).unwrap();
        let back = read_heatmap_csv(buf.as_slice(), map.width(), map.height(), "mem").unwrap();
        prop_assert_eq!(back, map);
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(seed in any::<u64>(), d in 1usize..6, attention in any::<bool>()) {
        let kind = if attention { ModelKind::Attention } else { ModelKind::MiNet };
        let model = MilPredictor::new(kind, d, seed).unwrap();
        let back = checkpoint::load(checkpoint::to_bytes(&model).as_slice()).unwrap();
        prop_assert_eq!(back.kind(), kind);
        let bits = |m: &MilPredictor| -> Vec<u64> {
            m.param_blocks().iter().flat_map(|b| b.iter().map(|v| v.to_bits())).collect()
        };
        prop_assert_eq!(bits(&back), bits(&model));
    }
}
