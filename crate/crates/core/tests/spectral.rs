use mouldprint::phantom::{generate, Element, PhantomSpec};
use mouldprint::spectral::{band_from_stack, decompose, tv_flow, tv_functional};
use mouldprint::{Field, GrayImage, TvFlowConfig, TvVariant};
use proptest::prelude::*;

fn cfg(dt: f64, t_max: f64, variant: TvVariant) -> TvFlowConfig {
    TvFlowConfig {
        dt,
        t_max,
        variant,
        ..TvFlowConfig::default()
    }
}

fn disk_image(w: usize, h: usize, disks: &[(f64, f64, f64, f64)]) -> GrayImage {
    let mut spec = PhantomSpec {
        background: 0.0,
        ..PhantomSpec::blank(w, h, 1.0)
    };
    for &(cx, cy, r, contrast) in disks {
        spec = spec.with(Element::Disk { cx, cy, r, contrast });
    }
    generate(&spec).unwrap().0
}

fn energy_about_mean(f: &Field) -> f64 {
    let m = f.mean();
    f.data.iter().map(|v| (v - m) * (v - m)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bands_and_residual_sum_to_the_input(
        data in prop::collection::vec(0.0f64..=1.0, 100),
        cells in prop::collection::btree_set(0usize..15, 1..5),
        aniso in any::<bool>(),
    ) {
        let img = GrayImage::new(10, 10, data).unwrap();
        let variant = if aniso { TvVariant::Anisotropic } else { TvVariant::Isotropic };
        let c = cfg(0.02, 0.3, variant);
        let edges: Vec<f64> = cells.iter().map(|&k| (k as f64 + 0.5) * c.dt).collect();
        let d = decompose(&img, &edges, &c).unwrap();
        prop_assert!(d.reconstruct().max_abs_diff(&img.to_field()) <= 1e-9);
    }
}

#[test]
fn flow_conserves_mass_and_obeys_the_maximum_principle() {
    let img = disk_image(40, 40, &[(12.0, 14.0, 6.0, 0.7), (27.0, 25.0, 9.0, 0.3)]);
    let (lo, hi) = img.to_field().min_max();
    let mean = img.mean();
    for variant in [TvVariant::Isotropic, TvVariant::Anisotropic] {
        let stack = tv_flow(&img, &cfg(0.05, 2.0, variant)).unwrap();
        for u in &stack.frames {
            assert!((u.mean() - mean).abs() < 1e-9);
            let (a, b) = u.min_max();
            assert!(a >= lo - 1e-6 && b <= hi + 1e-6, "{variant:?}: range [{a}, {b}]");
        }
    }
}

/// Forward-difference isotropic TV counted pixel by pixel, with the
/// differences across the far borders taken as zero.
fn boundary_length(img: &GrayImage) -> f64 {
    let (w, h) = (img.width(), img.height());
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let dx = if x + 1 < w { img.get(x + 1, y) - img.get(x, y) } else { 0.0 };
            let dy = if y + 1 < h { img.get(x, y + 1) - img.get(x, y) } else { 0.0 };
            total += dx.hypot(dy);
        }
    }
    total
}

#[test]
fn disk_total_variation_matches_its_boundary_count() {
    let img = disk_image(64, 64, &[(32.0, 32.0, 10.0, 0.5)]);
    let j = tv_functional(&img.to_field(), TvVariant::Isotropic);
    assert!((j - boundary_length(&img)).abs() < 1e-9);
    // A pixelated circle costs between its Euclidean and its L1 perimeter.
    let euclid = 2.0 * std::f64::consts::PI * 10.0 * 0.5;
    let l1 = tv_functional(&img.to_field(), TvVariant::Anisotropic);
    assert!(euclid < j && j < l1, "{euclid} < {j} < {l1}");
}

#[test]
fn fine_band_holds_little_of_a_coarse_disk() {
    let img = disk_image(64, 64, &[(32.0, 32.0, 10.0, 0.5)]);
    let stack = tv_flow(&img, &cfg(0.026, 1.3, TvVariant::Isotropic)).unwrap();
    let band = band_from_stack(&stack, 0.026, 1.0).unwrap();
    let ratio = band.energy() / energy_about_mean(&img.to_field());
    assert!(ratio < 0.05, "band energy fraction {ratio}");
}

#[test]
fn two_disks_land_in_different_bands() {
    // Scales r * h / 2 of 0.5 and 2.5.
    let small = (24.0, 24.0, 10.0, 0.1);
    let large = (72.0, 24.0, 10.0, 0.5);
    let img = disk_image(96, 48, &[small, large]);
    let stack = tv_flow(&img, &cfg(0.05, 3.5, TvVariant::Isotropic)).unwrap();
    let split = (0.5f64 * 2.5).sqrt();
    let fine = band_from_stack(&stack, 0.0, split).unwrap();
    let coarse = band_from_stack(&stack, split, 3.5).unwrap();
    let inside = |i: usize, (cx, cy, r, _): (f64, f64, f64, f64)| ((i % 96) as f64 - cx).hypot((i / 96) as f64 - cy) <= r + 2.0;
    // Shrinking one disk lifts the whole background to conserve mass, so
    // disk content is measured against the band's own background level.
    let share = |band: &Field, disk| {
        let mut outside: Vec<f64> =
            (0..band.data.len()).filter(|&i| !inside(i, small) && !inside(i, large)).map(|i| band.data[i]).collect();
        outside.sort_by(f64::total_cmp);
        let level = outside[outside.len() / 2];
        let e: f64 = (0..band.data.len()).filter(|&i| inside(i, disk)).map(|i| (band.data[i] - level).powi(2)).sum();
        let total: f64 = (0..band.data.len()).filter(|&i| inside(i, disk)).map(|i| img.data()[i].powi(2)).sum();
        e / total
    };
    assert!(share(&fine, small) > 0.8, "small disk in fine band {}", share(&fine, small));
    assert!(share(&fine, large) < 0.1, "large disk in fine band {}", share(&fine, large));
    assert!(share(&coarse, large) > 0.8, "large disk in coarse band {}", share(&coarse, large));
    assert!(share(&coarse, small) < 0.1, "small disk in coarse band {}", share(&coarse, small));
}
