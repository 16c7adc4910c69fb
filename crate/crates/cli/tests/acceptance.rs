//! End-to-end acceptance checks. Runs without the libtest harness so every
//! verdict line is printed, then exits non-zero if any check failed.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use dashu_float::DBig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ubench_core::advisor::{
    average_precision, evaluate, mean_average_precision, ndcg_at_k, spearman, train_ranker,
    DatasetFeatures, FeatureVector, GroupItem,
};
use ubench_core::mask::{
    boundary_ring, characterize_sample, convex_hull_area, iou, BoundaryLabel, CharacterizeConfig,
    ScaleLabel, ShapeLabel, ShapeParts,
};
use ubench_core::registry::{Family, ModelCard, Modality};
use ubench_core::stats::{paired_t_test, student_t_sf, Tier, TierLegend};
use ubench_core::uscore::{ComponentBands, Metric, QuantileBand, RawMetrics, GLOBAL_KEY};
use ubench_core::{GrayImage, LabelKind, Mask, RankingGroup, TrainConfig, UScoreBreakdown, UScoreConfig};

struct Report {
    lines: Vec<(bool, String, String)>,
}

impl Report {
    fn check(&mut self, pass: bool, id: &str, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag}  {id:<34} {detail}");
        self.lines.push((pass, id.to_string(), detail));
    }

    fn failures(&self) -> Vec<&str> {
        self.lines.iter().filter(|l| !l.0).map(|l| l.1.as_str()).collect()
    }
}

// ---------------------------------------------------------------- U-Score

const PREC: usize = 80;

fn big(s: &str) -> DBig {
    DBig::from_str(s).unwrap().with_precision(PREC).value()
}

fn clip01(x: DBig) -> DBig {
    if x < big("0") {
        big("0")
    } else if x > big("1") {
        big("1")
    } else {
        x
    }
}

/// The chain re-derived in 80-digit decimal arithmetic.
fn chain_oracle(raw: [&str; 4], bands: [(&str, &str); 4]) -> [f64; 3] {
    let [a_raw, p_raw, g_raw, s_raw] = raw.map(big);
    let lin = |x: &DBig, (lo, hi): (&str, &str)| clip01((x.clone() - big(lo)) / (big(hi) - big(lo)));
    let cost = |x: &DBig, (lo, hi): (&str, &str)| {
        let (l10, l90) = (big(lo).ln(), big(hi).ln());
        clip01((l90.clone() - x.ln()) / (l90 - l10))
    };
    let a = lin(&a_raw, bands[0]);
    let (p, g, s) = (cost(&p_raw, bands[1]), cost(&g_raw, bands[2]), lin(&s_raw, bands[3]));
    let one = big("1");
    let eff = big("3") / (one.clone() / p + one.clone() / g + one.clone() / s);
    let u = big("2") / (one.clone() / a.clone() + one / eff.clone());
    [a, eff, u].map(|v| v.to_f64().value())
}

fn reference_bands() -> ComponentBands {
    ComponentBands {
        iou: QuantileBand::new(Metric::Iou, "BUSI", 0.58, 0.71).unwrap(),
        params: QuantileBand::new(Metric::Params, GLOBAL_KEY, 0.39, 4.32).unwrap(),
        flops: QuantileBand::new(Metric::Flops, GLOBAL_KEY, 0.88, 4.20).unwrap(),
        fps: QuantileBand::new(Metric::Fps, GLOBAL_KEY, 24.28, 121.63).unwrap(),
    }
}

fn score(bands: &ComponentBands, raw: [f64; 4]) -> UScoreBreakdown {
    let raw = RawMetrics { accuracy: raw[0], params: raw[1], flops: raw[2], fps: raw[3] };
    UScoreBreakdown::compute(&raw, bands, &UScoreConfig::default()).unwrap()
}

fn golden_chain(r: &mut Report) {
    let b = score(&reference_bands(), [0.70, 2.0, 2.0, 100.0]);
    let [a, eff, u] = chain_oracle(
        ["0.70", "2.0", "2.0", "100"],
        [("0.58", "0.71"), ("0.39", "4.32"), ("0.88", "4.20"), ("24.28", "121.63")],
    );
    let drift = (b.a - a).abs().max((b.eff - eff).abs()).max((b.u - u).abs());
    r.check(
        drift < 1e-12,
        "uscore.golden.oracle_agreement",
        format!("max |impl - oracle| = {drift:.1e} (tol 1e-12)"),
    );
    r.check(
        (a - 0.9231).abs() < 5e-5 && (eff - 0.4605).abs() <= 5e-4 && (u - 0.6144).abs() <= 1e-3,
        "uscore.golden.published",
        format!("a={a:.4} (0.9231) eff={eff:.4} (0.4605±5e-4) u={u:.4} (0.6144±1e-3)"),
    );
}

fn uscore_properties(r: &mut Report) {
    let bands = reference_bands();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let (mut clip_bad, mut hm_bad, mut literal_bad, mut zero_bad) = (0, 0, 0, 0);
    let mut zero_cases = 0;
    let mut mono_bad = [0usize; 4];
    for _ in 0..n {
        // Ranges straddle each band so interior, clipped and zero cases all occur.
        let raw = [
            rng.random_range(0.50..=0.80),
            rng.random_range(0.2f64.ln()..9.0f64.ln()).exp(),
            rng.random_range(0.4f64.ln()..9.0f64.ln()).exp(),
            rng.random_range(10.0..200.0f64),
        ];
        let b = score(&bands, raw);
        if [b.a, b.p, b.g, b.s, b.eff, b.u].iter().any(|c| !(0.0..=1.0).contains(c)) {
            clip_bad += 1;
        }
        let (lo, hi) = (b.a.min(b.eff), b.a.max(b.eff));
        let (elo, ehi) = (b.p.min(b.g).min(b.s), b.p.max(b.g).max(b.s));
        if b.u < lo - 1e-12 || b.u > hi + 1e-12 || b.eff < elo - 1e-12 || b.eff > ehi + 1e-12 {
            hm_bad += 1;
        }
        if b.u > lo + 1e-12 {
            literal_bad += 1;
        }
        if [b.a, b.p, b.g, b.s].contains(&0.0) {
            zero_cases += 1;
            if b.u != 0.0 {
                zero_bad += 1;
            }
        }
        // Better accuracy / fewer params / fewer FLOPs / more FPS never hurts.
        let step: f64 = rng.random_range(1.0..3.0);
        let better = [
            [(raw[0] + 0.05 * step).min(1.0), raw[1], raw[2], raw[3]],
            [raw[0], raw[1] / step, raw[2], raw[3]],
            [raw[0], raw[1], raw[2] / step, raw[3]],
            [raw[0], raw[1], raw[2], raw[3] * step],
        ];
        for (k, x) in better.into_iter().enumerate() {
            if score(&bands, x).u < b.u - 1e-12 {
                mono_bad[k] += 1;
            }
        }
    }
    r.check(clip_bad == 0, "uscore.props.clipping", format!("{clip_bad}/{n} tuples outside [0,1]"));
    r.check(
        hm_bad == 0,
        "uscore.props.harmonic_bounds",
        format!("{hm_bad}/{n} violate min(a,eff) <= u <= max(a,eff) or the eff analogue"),
    );
    r.check(
        literal_bad == 0,
        "uscore.props.u_le_min_a_eff",
        format!("{literal_bad}/{n} tuples have u > min(a,eff); a weighted harmonic mean lies between its inputs"),
    );
    let names = ["accuracy", "params", "flops", "fps"];
    for (k, bad) in mono_bad.iter().enumerate() {
        r.check(*bad == 0, &format!("uscore.props.monotone.{}", names[k]), format!("{bad}/{n} violations"));
    }
    r.check(
        zero_bad == 0 && zero_cases > 0,
        "uscore.props.zero_component",
        format!("{zero_bad}/{zero_cases} zero-component tuples scored non-zero"),
    );
}

// ------------------------------------------------------------ CLI helpers

fn ubench(args: &[&str]) -> (i32, Vec<u8>, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = ubench::run(std::iter::once("ubench").chain(args.iter().copied()), &mut out, &mut err);
    (code, out, String::from_utf8_lossy(&err).into_owned())
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn leaderboards(r: &mut Report) {
    let row = |table: &str, metric: &str, rank: usize| -> Option<(String, f64)> {
        let (code, out, err) = ubench(&["leaderboard", "--metric", metric, "--table", p(&fixtures().join(table))]);
        if code != 0 {
            println!("      {}", err.trim());
            return None;
        }
        let text = String::from_utf8(out).ok()?;
        let line = text.lines().nth(rank)?;
        let mut cells = line.split(',');
        let got_rank: usize = cells.next()?.parse().ok()?;
        (got_rank == rank).then_some(())?;
        Some((cells.next()?.to_string(), cells.next()?.parse().ok()?))
    };
    let expect = [
        ("tables/iou_in_domain.csv", "iou", 1, "RWKV-UNet", 79.84),
        ("tables/iou_in_domain.csv", "iou", 2, "UTANet", 79.43),
        ("tables/iou_in_domain.csv", "iou", 20, "U-Net", 78.31),
        ("tables/uscore_in_domain.csv", "uscore", 1, "LGMSNet", 84.99),
    ];
    for (table, metric, rank, model, value) in expect {
        let got = row(table, metric, rank);
        let pass = got.as_ref().is_some_and(|(m, v)| m == model && (v - value).abs() < 0.005);
        r.check(
            pass,
            &format!("leaderboard.{metric}.rank{rank}"),
            match got {
                Some((m, v)) => format!("want {model} {value:.2}, got {m} {v:.2} (exact to 2 dp)"),
                None => format!("want {model} {value:.2}, got no row"),
            },
        );
    }
}

// ------------------------------------------------------------------ stats

fn t_pdf(x: f64, v: u32) -> f64 {
    // Γ((v+1)/2)/Γ(v/2) by the half-integer recurrence.
    let mut ratio = if v % 2 == 1 { 1.0 / PI.sqrt() } else { PI.sqrt() / 2.0 };
    let mut k = if v % 2 == 1 { 1 } else { 2 };
    while k < v {
        ratio *= (k as f64 + 1.0) / k as f64;
        k += 2;
    }
    let vf = v as f64;
    ratio / (vf * PI).sqrt() * (1.0 + x * x / vf).powf(-(vf + 1.0) / 2.0)
}

/// Upper tail by composite 20-point Gauss-Legendre over [0, t].
fn t_sf_oracle(t: f64, v: u32) -> f64 {
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
        let mid = (k as f64 + 0.5) * h;
        for (x, w) in NODES {
            integral += w * h / 2.0 * (t_pdf(mid + h / 2.0 * x, v) + t_pdf(mid - h / 2.0 * x, v));
        }
    }
    0.5 - integral
}

fn t_test(r: &mut Report) {
    let res = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
    let oracle = 2.0 * t_sf_oracle(res.t_stat, 4);
    r.check(
        (res.p_two_sided - 0.0132).abs() <= 1e-3 && (res.p_two_sided - oracle).abs() <= 1e-3,
        "stats.example_p",
        format!("p={:.6} oracle={oracle:.6} (0.0132±1e-3)", res.p_two_sided),
    );
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for t in [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 10.0] {
        for df in [1, 2, 5, 10, 30] {
            worst = worst.max((student_t_sf(t, df).unwrap() - t_sf_oracle(t, df)).abs());
            points += 1;
        }
    }
    r.check(worst < 1e-8, "stats.t_sf_grid", format!("{points} points, max |err| = {worst:.2e} (tol 1e-8)"));
    let legend = TierLegend::default();
    let cases = [
        (0.000_099_9, Tier::P0001),
        (0.0001, Tier::P001),
        (0.001, Tier::P01),
        (0.01, Tier::P05),
        (0.05, Tier::NotSignificant),
        (0.049_999, Tier::P05),
    ];
    let wrong: Vec<f64> = cases.iter().filter(|(p, t)| legend.tier(*p) != *t).map(|c| c.0).collect();
    r.check(wrong.is_empty(), "stats.tier_boundaries_strict", format!("misclassified p: {wrong:?}"));
}

// ------------------------------------------------------------------- mask

fn iou_brute_force(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let fill = rng.random_range(0.0..0.7);
        let mut gen = || Mask::new(32, 32, (0..1024).map(|_| u8::from(rng.random_bool(fill))).collect()).unwrap();
        let (a, b) = (gen(), gen());
        let set = |m: &Mask| -> HashSet<usize> { (0..1024).filter(|&i| m.labels()[i] != 0).collect() };
        let (sa, sb) = (set(&a), set(&b));
        let union = sa.union(&sb).count();
        let expected = if union == 0 { 1.0 } else { sa.intersection(&sb).count() as f64 / union as f64 };
        if iou(&a, &b, 1).unwrap() != expected {
            mismatches += 1;
        }
    }
    r.check(mismatches == 0, "mask.iou_brute_force", format!("{mismatches}/1000 pairs differ from set counts"));
}

fn shape(m: &Mask) -> ShapeParts {
    let img = GrayImage::constant(m.width(), m.height(), 0.0);
    characterize_sample(m, &img, &CharacterizeConfig::default()).unwrap().shape.unwrap()
}

fn geometry(r: &mut Report) {
    let disk = Mask::from_fn(128, 128, |x, y| {
        let (dx, dy) = (x as f64 - 64.0, y as f64 - 64.0);
        dx * dx + dy * dy <= 2500.0
    });
    let d = shape(&disk);
    r.check(
        (0.92..=1.08).contains(&d.circularity),
        "geometry.disk_circularity",
        format!("circularity={:.4} want [0.92,1.08] (perimeter {:.1} from the traced contour)", d.circularity, d.perimeter),
    );
    r.check(
        (0.97..=1.0).contains(&d.solidity),
        "geometry.disk_solidity",
        format!("solidity={:.4} want [0.97,1.0]", d.solidity),
    );
    let mut worst: f64 = 0.0;
    for (w, h) in [(1, 1), (3, 17), (10, 10), (25, 40), (60, 2)] {
        worst = worst.max((shape(&Mask::rect(80, 80, 5, 5, w, h)).solidity - 1.0).abs());
    }
    r.check(worst <= 0.02, "geometry.rectangle_solidity", format!("max |solidity-1| = {worst:.4} (tol 0.02)"));
    let (bar, span) = (20..40, 5..55);
    let plus = Mask::from_fn(60, 60, |x, y| {
        (bar.contains(&x) && span.contains(&y)) || (bar.contains(&y) && span.contains(&x))
    });
    let s = shape(&plus).solidity;
    r.check(s < 0.9, "geometry.plus_solidity", format!("solidity={s:.4} want < 0.9 (hull {:.0})", convex_hull_area(&plus).unwrap()));
    let ring = boundary_ring(&Mask::rect(20, 20, 5, 5, 10, 10), 1).unwrap().count();
    r.check(ring == 80, "geometry.square_ring_area", format!("area={ring} want 80"));
}

// ----------------------------------------------------------- rank metrics

fn rank_metrics(r: &mut Report) {
    let n = ndcg_at_k(&[1.0, 3.0, 2.0], 3);
    r.check((n - 0.8175).abs() <= 1e-4, "rank.ndcg3", format!("NDCG@3([1,3,2]) = {n:.6} (0.8175±1e-4)"));
    let m = mean_average_precision(&[vec![true, false, true]]);
    r.check((m - 0.8333).abs() <= 1e-4, "rank.map", format!("MAP = {m:.6} (0.8333±1e-4)"));
    let rho = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
    r.check(rho == 0.8, "rank.spearman", format!("rho = {rho} (0.8 exactly)"));
    let ends = (
        ndcg_at_k(&[3.0, 2.0, 1.0], 3),
        average_precision(&[true, true, false]),
        spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
        spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
    );
    r.check(ends == (1.0, 1.0, 1.0, -1.0), "rank.endpoints", format!("ideal NDCG, perfect AP, rho± = {ends:?}"));
}

// ------------------------------------------------------- planted advisor

fn planted_cards(rng: &mut ChaCha8Rng, n: usize) -> Vec<ModelCard> {
    (0..n)
        .map(|i| ModelCard {
            name: format!("M{i:02}"),
            family: Family::ALL[rng.random_range(0..Family::ALL.len())],
            year: 2015 + rng.random_range(0..10),
            venue: String::new(),
            deep_supervision: rng.random_bool(0.5),
            pretrained: false,
            params_m: rng.random_range(-1.0..6.5f64).exp(),
            flops_g: rng.random_range(-1.0..6.0f64).exp(),
            fps: rng.random_range(2.0..150.0),
        })
        .collect()
}

/// Utility rises with the speed bin and falls with the storage and compute
/// bins; relevance is its min-max rescaling within each group.
fn utility(c: &ModelCard) -> f64 {
    let b = ubench_core::advisor::discretize_model(c.params_m, c.flops_g, c.fps).unwrap();
    b.speed as usize as f64 - b.storage as usize as f64 - b.compute as usize as f64
}

fn planted_groups(seed: u64, n_groups: usize, n_models: usize) -> Vec<RankingGroup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cards = planted_cards(&mut rng, n_models);
    let u: Vec<f64> = cards.iter().map(utility).collect();
    let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    (0..n_groups)
        .map(|g| {
            let ds = DatasetFeatures {
                modality: Modality::ALL[rng.random_range(0..Modality::ALL.len())],
                scale: if rng.random_bool(0.5) { ScaleLabel::Small } else { ScaleLabel::Large },
                shape: if rng.random_bool(0.5) { ShapeLabel::Regular } else { ShapeLabel::Irregular },
                boundary: if rng.random_bool(0.5) { BoundaryLabel::Clear } else { BoundaryLabel::Blur },
            };
            RankingGroup {
                dataset: format!("G{g}"),
                items: cards
                    .iter()
                    .zip(&u)
                    .map(|(c, &v)| GroupItem {
                        model: c.name.clone(),
                        features: FeatureVector::build(&ds, c).unwrap(),
                        relevance: (v - lo) / (hi - lo),
                    })
                    .collect(),
            }
        })
        .collect()
}

fn planted_advisor(r: &mut Report) {
    let groups = planted_groups(17, 10, 20);
    let (train, test) = groups.split_at(7);
    let cfg = TrainConfig::default();
    let model = train_ranker(train, LabelKind::Uscore, &cfg).unwrap();
    let eval = evaluate(&model, test, &[5]).unwrap();
    let ndcg5 = eval.ndcg_at[&5];
    r.check(ndcg5 >= 0.9, "advisor.planted.ndcg5", format!("held-out NDCG@5 = {ndcg5:.4} (>= 0.9)"));
    r.check(eval.spearman >= 0.8, "advisor.planted.spearman", format!("held-out rho = {:.4} (>= 0.8)", eval.spearman));

    // Same zoo, training relevance permuted within each group.
    let mut rhos = Vec::new();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let shuffled: Vec<RankingGroup> = train
            .iter()
            .map(|g| {
                let mut rel: Vec<f64> = g.items.iter().map(|i| i.relevance).collect();
                rel.shuffle(&mut rng);
                let mut g = g.clone();
                for (item, v) in g.items.iter_mut().zip(rel) {
                    item.relevance = v;
                }
                g
            })
            .collect();
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        let m = train_ranker(&shuffled, LabelKind::Uscore, &cfg).unwrap();
        rhos.push(evaluate(&m, test, &[5]).unwrap().spearman);
    }
    let mean_abs = rhos.iter().map(|v| v.abs()).sum::<f64>() / rhos.len() as f64;
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    r.check(
        mean_abs <= 0.15,
        "advisor.shuffled_control",
        format!("50 seeds: mean |rho| = {mean_abs:.4} (<= 0.15), mean rho = {mean:+.4}"),
    );
}

// ------------------------------------------------------------ determinism

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(r: &mut Report) {
    let tmp = tempfile::tempdir().unwrap();
    let (masks, images) = (tmp.path().join("masks"), tmp.path().join("images"));
    fs::create_dir_all(&masks).unwrap();
    fs::create_dir_all(&images).unwrap();
    for (i, w) in [6usize, 14, 22].into_iter().enumerate() {
        let m = Mask::rect(32, 32, 3, 5, w, w / 2 + 3);
        fs::write(masks.join(format!("{i}.png")), m.to_png_bytes()).unwrap();
        fs::write(images.join(format!("{i}.png")), Mask::from_fn(32, 32, |x, _| x % 3 == 0).to_png_bytes()).unwrap();
    }
    let zoo = fixtures().join("zoo");
    let table = fixtures().join("tables/uscore_in_domain.csv");
    let run_all = |work: &Path| -> Result<Vec<u8>, String> {
        let reg = work.join("registry");
        let o = |n: &str| work.join(n).to_str().unwrap().to_string();
        let (rg, rk) = (p(&reg).to_string(), o("ranker.json"));
        let stages: Vec<Vec<&str>> = vec![
            vec!["ingest", "--from", p(&zoo), "--out", &rg],
            vec!["characterize", "--masks", p(&masks), "--images", p(&images), "--modality", "CT"],
            vec!["score", "--registry", &rg, "--scope", "source"],
            vec!["score", "--registry", &rg, "--scope", "target", "--format", "json"],
            vec!["significance", "--registry", &rg],
            vec!["leaderboard", "--registry", &rg, "--metric", "iou", "--format", "md"],
            vec!["leaderboard", "--table", p(&table), "--metric", "uscore", "--format", "json"],
            vec!["advisor-train", "--registry", &rg, "--rounds", "40", "--subsample", "0.8", "--seed", "3",
                 "--holdout", "BUSI,Kvasir", "--out", &rk],
            vec!["advisor-eval", "--registry", &rg, "--ranker", &rk],
            vec!["advise", "--registry", &rg, "--ranker", &rk, "--modality", "Ultrasound", "--scale",
                 "large", "--shape", "irregular", "--boundary", "blur", "--storage", "Small"],
        ];
        let mut transcript = Vec::new();
        for args in stages {
            let (code, out, err) = ubench(&args);
            if code != 0 {
                return Err(format!("{} exited {code}: {err}", args[0]));
            }
            transcript.extend_from_slice(&out);
        }
        Ok(transcript)
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let outcome = (|| -> Result<String, String> {
        let first = run_all(&a)?;
        let files = files_under(&a);
        let again = run_all(&a)?;
        let other = run_all(&b)?;
        let same = first == again && first == other && files == files_under(&a) && files == files_under(&b);
        if same {
            Ok(format!("10 stages x3 runs, {} stdout bytes and {} files identical", first.len(), files.len()))
        } else {
            Err("outputs differ between runs".into())
        }
    })();
    match outcome {
        Ok(msg) => r.check(true, "determinism.cli_reruns", msg),
        Err(msg) => r.check(false, "determinism.cli_reruns", msg),
    }
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; none apply here.
    let start = Instant::now();
    let mut r = Report { lines: Vec::new() };
    golden_chain(&mut r);
    uscore_properties(&mut r);
    leaderboards(&mut r);
    t_test(&mut r);
    iou_brute_force(&mut r);
    geometry(&mut r);
    rank_metrics(&mut r);
    planted_advisor(&mut r);
    determinism(&mut r);
    let failed = r.failures();
    println!(
        "\nacceptance: {} passed, {} failed in {:.1}s",
        r.lines.len() - failed.len(),
        failed.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
