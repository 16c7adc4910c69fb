use std::f64::consts::PI;

use proptest::prelude::*;
use ubench_core::registry::{DatasetCard, Family, ModelCard, Modality, Registry, Role, Scope};
use ubench_core::stats::{
    classify, paired_t_test, significance_matrix, student_t_sf, Direction, Tier, TierLegend,
};

/// Γ((v+1)/2) / Γ(v/2) for integer v by the half-integer recurrence.
fn gamma_ratio(v: u32) -> f64 {
    // ratio(v) = Γ((v+1)/2)/Γ(v/2); ratio(1) = 1/√π, ratio(2) = √π/2,
    // ratio(v+2) = ratio(v) · ((v+1)/2) / (v/2)
    let mut r = if v % 2 == 1 { 1.0 / PI.sqrt() } else { PI.sqrt() / 2.0 };
    let mut k = if v % 2 == 1 { 1 } else { 2 };
    while k < v {
        r *= (k as f64 + 1.0) / k as f64;
        k += 2;
    }
    r
}

fn pdf(x: f64, v: u32) -> f64 {
    let vf = v as f64;
    gamma_ratio(v) / (vf * PI).sqrt() * (1.0 + x * x / vf).powf(-(vf + 1.0) / 2.0)
}

/// 0.5 − ∫₀ᵗ pdf by composite 20-point Gauss–Legendre on many panels.
fn sf_oracle(t: f64, v: u32) -> f64 {
    const NODES: [(f64, f64); 10] = [
        (0.076_526_521_133_497_33, 0.152_753_387_130_725_85),
        (0.227_785_851_141_645_08, 0.149_172_986_472_603_75),
        (0.373_706_088_715_419_56, 0.142_096_109_318_382_05),
        (0.510_867_001_950_827_1, 0.131_688_638_449_176_63),
        (0.636_053_680_726_515, 0.118_194_531_961_518_42),
        (0.746_331_906_460_150_8, 0.101_930_119_817_240_44),
        (0.839_116_971_822_218_8, 0.083_276_741_576_704_75),
        (0.912_234_428_251_326, 0.062_672_048_334_109_06),
        (0.963_971_927_277_913_8, 0.040_601_429_800_386_94),
        (0.993_128_599_185_094_9, 0.017_614_007_139_152_12),
    ];
    let panels = 400;
    let h = t / panels as f64;
    let mut integral = 0.0;
    for k in 0..panels {
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        for (x, w) in NODES {
            integral += w * half * (pdf(mid + half * x, v) + pdf(mid - half * x, v));
        }
    }
    0.5 - integral
}

#[test]
fn example_p_value() {
    let r = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
    let oracle = 2.0 * sf_oracle(r.t_stat, 4);
    assert!((r.p_two_sided - oracle).abs() < 1e-9);
    assert!((r.p_two_sided - 0.0132).abs() < 1e-3);
    assert!((student_t_sf(4.2426, 4).unwrap() - sf_oracle(4.2426, 4)).abs() < 1e-9);
}

#[test]
fn sf_matches_integration_on_grid() {
    let ts = [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 10.0];
    let dfs = [1, 2, 5, 10, 30];
    let mut worst: f64 = 0.0;
    for &t in &ts {
        for &df in &dfs {
            let got = student_t_sf(t, df).unwrap();
            worst = worst.max((got - sf_oracle(t, df)).abs());
        }
    }
    assert!(worst < 1e-8, "max abs error {worst:e}");
}

#[test]
fn cauchy_closed_form() {
    for t in [0.2f64, 1.0, 3.7, 25.0] {
        let exact = 0.5 - t.atan() / PI;
        assert!((student_t_sf(t, 1).unwrap() - exact).abs() < 1e-13);
    }
}

fn normal_sf(x: f64) -> f64 {
    // Abramowitz–Stegun 7.1.26 is too coarse; integrate the density instead.
    let n = 20_000;
    let h = x / n as f64;
    let f = |z: f64| (-z * z / 2.0).exp() / (2.0 * PI).sqrt();
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 - s * h / 3.0
}

#[test]
fn large_df_approaches_normal() {
    for t in [1.0, 2.0, 3.0] {
        let got = student_t_sf(t, 250).unwrap();
        assert!((got - normal_sf(t)).abs() < 2e-3);
    }
}

#[test]
fn tier_boundaries_are_strict() {
    let legend = TierLegend::default();
    assert_eq!(legend.tier(0.0001), Tier::P001);
    assert_eq!(legend.tier(0.000_099_9), Tier::P0001);
    assert_eq!(legend.tier(0.001), Tier::P01);
    assert_eq!(legend.tier(0.01), Tier::P05);
    assert_eq!(legend.tier(0.05), Tier::NotSignificant);
    assert_eq!(classify(0.2, 0.5, 0.6).direction, Direction::Degrades);
}

fn registry(records: &str) -> Registry {
    let card = |n: &str| ModelCard {
        name: n.into(),
        family: Family::Cnn,
        year: 2020,
        venue: String::new(),
        deep_supervision: false,
        pretrained: false,
        params_m: 1.0,
        flops_g: 1.0,
        fps: 1.0,
    };
    Registry::new(
        vec![card("U-Net"), card("V"), card("W")],
        vec![DatasetCard {
            name: "BUSI".into(),
            modality: Modality::Ultrasound,
            role: Role::Source,
            class_count: 1,
        }],
    )
    .unwrap()
    .ingest_records(Some(records.as_bytes()), None)
    .unwrap()
}

fn rows(model: &str, values: &[f64]) -> String {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{model},BUSI,in_domain,{i},{v}\n"))
        .collect()
}

#[test]
fn matrix_cases() {
    let base: Vec<f64> = (0..30).map(|i| 0.4 + 0.01 * i as f64).collect();
    let shifted: Vec<f64> = base.iter().map(|v| v + 0.05).collect();
    let csv = format!(
        "model,dataset,scope,sample_index,iou\n{}{}{}",
        rows("U-Net", &base),
        rows("V", &base),
        rows("W", &shifted)
    );
    let reg = registry(&csv);
    let m = significance_matrix(&reg, "U-Net", Scope::InDomain, &TierLegend::default()).unwrap();
    assert_eq!(m.cells.len(), 2);
    let same = m.get("V", "BUSI").unwrap().significance;
    assert_eq!((same.tier, same.direction), (Tier::NotSignificant, Direction::Tie));
    let up = m.get("W", "BUSI").unwrap().significance;
    assert_eq!((up.tier, up.direction), (Tier::P0001, Direction::Improves));

    let only = registry(&format!("model,dataset,scope,sample_index,iou\n{}", rows("U-Net", &base)));
    assert!(significance_matrix(&only, "U-Net", Scope::InDomain, &TierLegend::default())
        .unwrap()
        .cells
        .is_empty());
    assert!(significance_matrix(&only, "Nope", Scope::InDomain, &TierLegend::default()).is_err());
}

#[test]
fn mean_only_records_are_unavailable() {
    let reg = registry("model,dataset,scope,sample_index,iou\n")
        .ingest_records(
            None,
            Some(b"model,dataset,scope,mean_iou\nU-Net,BUSI,in_domain,0.7\nV,BUSI,in_domain,0.8\n"),
        )
        .unwrap();
    let m = significance_matrix(&reg, "U-Net", Scope::InDomain, &TierLegend::default()).unwrap();
    let c = m.get("V", "BUSI").unwrap();
    assert_eq!(c.significance.tier, Tier::Unavailable);
    assert_eq!(c.significance.direction, Direction::Improves);
    let csv = String::from_utf8(m.to_csv()).unwrap();
    assert_eq!(
        csv,
        "model,dataset,scope,t,df,p,tier,direction\nV,BUSI,in_domain,,,,unavailable,improves\n"
    );
}

proptest! {
    #[test]
    fn sf_symmetry_and_monotonicity(t in 0.0..20.0f64, dt in 0.01..5.0f64, df in 1u32..300) {
        let a = student_t_sf(t, df).unwrap();
        let b = student_t_sf(-t, df).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
        prop_assert!(student_t_sf(t + dt, df).unwrap() < a || a == 0.0);
        prop_assert!((0.0..=0.5).contains(&a));
    }

    #[test]
    fn p_symmetric_in_sign(d in prop::collection::vec(-1.0..1.0f64, 2..40)) {
        let zeros = vec![0.0; d.len()];
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let a = paired_t_test(&d, &zeros).unwrap();
        let b = paired_t_test(&neg, &zeros).unwrap();
        prop_assert!((a.p_two_sided - b.p_two_sided).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.p_two_sided));
        prop_assert_eq!(a.df as usize, d.len() - 1);
    }

    #[test]
    fn matrix_ignores_record_order(seed in 0u64..1000) {
        let base: Vec<f64> = (0..8).map(|i| ((i * 37 + seed) % 100) as f64 / 100.0).collect();
        let other: Vec<f64> = (0..8).map(|i| ((i * 53 + seed * 7) % 100) as f64 / 100.0).collect();
        let a = format!("model,dataset,scope,sample_index,iou\n{}{}", rows("U-Net", &base), rows("V", &other));
        let mut lines: Vec<&str> = a.lines().skip(1).collect();
        lines.reverse();
        let b = format!("model,dataset,scope,sample_index,iou\n{}\n", lines.join("\n"));
        let legend = TierLegend::default();
        let ma = significance_matrix(&registry(&a), "U-Net", Scope::InDomain, &legend).unwrap();
        let mb = significance_matrix(&registry(&b), "U-Net", Scope::InDomain, &legend).unwrap();
        prop_assert_eq!(ma, mb);
    }
}
