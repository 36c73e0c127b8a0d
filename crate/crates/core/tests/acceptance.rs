//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use shapecl::conform::{generate_conformers, shape_descriptors, ConformerSet, Point};
use shapecl::datagen::{
    build_matrix, load_matrix, matrix_from_bytes, pair_count, save_matrix, split_dataset, toy_molecules, DataError,
    PairMatrix, SplitSpec,
};
use shapecl::model::{tanimoto_kernel_matrix, EncoderKind, Model, ModelConfig, MolInput};
use shapecl::molio::{morgan_fingerprint, tanimoto_2d, MolGraph};
use shapecl::overlay::{
    assign_features, optimize_overlay, overlap_value_and_gradient, shape_tanimoto, GaussianAtom, OverlayMolecule,
    OverlayOptions, RigidTransform,
};
use shapecl::tensor::{load_checkpoint, save_checkpoint, Checkpoint, Tape, Tensor, TensorError, Var};
use shapecl::train::{evaluate, fit, null_baseline, pairwise_loss, spearman, FitOutcome, TrainConfig};

// tolerances
const SELF_OVERLAY_MIN: f64 = 0.999;
const SYMMETRY_MAX: f64 = 1e-3;
const OVERLAY_SECONDS_MAX: f64 = 300.0;
const VOLUME_GRAD_REL_MAX: f64 = 1e-5;
const CLOSED_FORM_MAX: f64 = 1e-10;
const TOY_PAIR_COUNT: u64 = 1_231_097_010;
const LEARNING_R_MIN: f64 = 0.5;
const KERNEL_LOSS_GRAD_REL_MAX: f64 = 1e-4;
const SPEARMAN_MAX: f64 = -0.4;
const ENCODING_INVARIANCE: f32 = 1e-5;
const DESCRIPTOR_INVARIANCE: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

fn random_translation(rng: &mut ChaCha8Rng, scale: f64) -> Point {
    Vector3::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

fn conformer_sets(mols: &[MolGraph], max_confs: usize) -> Vec<ConformerSet> {
    mols.iter()
        .map(|g| {
            let mut s = generate_conformers(g, max_confs, 0).expect("toy molecules embed");
            assign_features(&mut s);
            s
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let sets = conformer_sets(&toy_molecules(50, 1001), 1);
    let opts = OverlayOptions::default();
    let started = Instant::now();
    let mols: Vec<OverlayMolecule> = sets.iter().map(|s| OverlayMolecule::from_set(s).remove(0)).collect();
    let mut worst_self: f64 = 1.0;
    for s in &sets {
        let rot = random_rotation(&mut rng).to_rotation_matrix().into_inner();
        let moved = s.conformers[0].transformed(&rot, &random_translation(&mut rng, 5.0));
        let a = OverlayMolecule::from_conformer(&s.conformers[0], &s.graph);
        let b = OverlayMolecule::from_conformer(&moved, &s.graph);
        worst_self = worst_self.min(optimize_overlay(&a, &b, &opts).shape_tanimoto);
    }
    let mut worst_sym: f64 = 0.0;
    for i in 0..mols.len() {
        let j = (i + 1) % mols.len();
        let ab = optimize_overlay(&mols[i], &mols[j], &opts).shape_tanimoto;
        let ba = optimize_overlay(&mols[j], &mols[i], &opts).shape_tanimoto;
        worst_sym = worst_sym.max((ab - ba).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst_self >= SELF_OVERLAY_MIN && worst_sym <= SYMMETRY_MAX && secs <= OVERLAY_SECONDS_MAX,
        format!("min self-overlay {worst_self:.6} (>= {SELF_OVERLAY_MIN}), max asymmetry {worst_sym:.2e} (<= {SYMMETRY_MAX:e}), {secs:.1} s single-threaded (<= {OVERLAY_SECONDS_MAX} s)"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let sets = conformer_sets(&toy_molecules(20, 2002), 1);
    let gauss: Vec<Vec<GaussianAtom>> = sets
        .iter()
        .map(|s| OverlayMolecule::from_set(s).remove(0).shape)
        .collect();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for pose in 0..100 {
        let (a, b) = (&gauss[pose % 20], &gauss[(pose * 7 + 3) % 20]);
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let t = random_translation(&mut rng, 2.0);
        let (_, g) = overlap_value_and_gradient(a, b, &q, &t);
        let mut numeric = [0.0; 7];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let eval = |d: f64| {
                let (mut q2, mut t2) = (q, t);
                if k < 4 {
                    q2[k] += d;
                } else {
                    t2[k - 4] += d;
                }
                overlap_value_and_gradient(a, b, &q2, &t2).0
            };
            *slot = (eval(h) - eval(-h)) / (2.0 * h);
        }
        let diff = g.iter().zip(&numeric).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = g.iter().chain(&numeric).fold(0.0f64, |m, x| m.max(x.abs()));
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    outcome(
        worst < VOLUME_GRAD_REL_MAX,
        format!("max relative gradient error {worst:.2e} over 100 poses (< {VOLUME_GRAD_REL_MAX:e})"),
    )
}

fn criterion_3() -> Outcome {
    // carbon and oxygen van der Waals radii, amplitude 2.7
    let (sa, sb, p) = (1.70f64, 1.52f64, 2.7f64);
    let alpha = |s: f64| std::f64::consts::PI * (3.0 * p / (4.0 * std::f64::consts::PI)).powf(2.0 / 3.0) / (s * s);
    let (aa, ab) = (alpha(sa), alpha(sb));
    let v = |a1: f64, a2: f64, d: f64| {
        let s = a1 + a2;
        p * p * (std::f64::consts::PI / s).powf(1.5) * (-a1 * a2 * d * d / s).exp()
    };
    let a = [GaussianAtom::new(Point::zeros(), sa)];
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let d = 0.25 * k as f64;
        let b = [GaussianAtom::new(Point::zeros(), sb)];
        let t = RigidTransform::new(UnitQuaternion::identity(), Vector3::new(d, 0.0, 0.0));
        let got = shape_tanimoto(&a, &b, &t);
        let vab = v(aa, ab, d);
        let expected = vab / (v(aa, aa, 0.0) + v(ab, ab, 0.0) - vab);
        worst = worst.max((got - expected).abs());
    }
    outcome(
        worst <= CLOSED_FORM_MAX,
        format!("max |error| {worst:.2e} over 20 distances (<= {CLOSED_FORM_MAX:e})"),
    )
}

fn criterion_4() -> Outcome {
    let count = pair_count(49_621);
    let mols = toy_molecules(10, 4004);
    let sets: Vec<ConformerSet> = mols
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut s = generate_conformers(g, 1 + i % 3, 0).unwrap();
            assign_features(&mut s);
            s
        })
        .collect();
    let ks: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    let expected: usize = (0..10).flat_map(|i| (i + 1..10).map(move |j| (i, j))).map(|(i, j)| ks[i] * ks[j]).sum();
    let opts = OverlayOptions::default();
    let (m1, r1) = build_matrix(&sets, 1, &opts).unwrap();
    let (m8, _) = build_matrix(&sets, 8, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (p1, p8) = (dir.path().join("w1.mcls"), dir.path().join("w8.mcls"));
    save_matrix(&m1, &p1).unwrap();
    save_matrix(&m8, &p8).unwrap();
    let identical = std::fs::read(&p1).unwrap() == std::fs::read(&p8).unwrap();
    outcome(
        count == TOY_PAIR_COUNT && r1.overlay_calls == expected && identical,
        format!(
            "pair_count(49621) = {count}; overlay calls {} vs sum k_i k_j = {expected} (k = {ks:?}); 1- vs 8-worker files identical: {identical}",
            r1.overlay_calls
        ),
    )
}

/// Shared data for the learning criteria.
struct Learning {
    mols: Vec<MolGraph>,
    matrix: PairMatrix,
    split: SplitSpec,
}

fn learning_data() -> Learning {
    let mols = toy_molecules(500, 5005);
    let sets = conformer_sets(&mols, 1);
    let started = Instant::now();
    let (matrix, report) = build_matrix(&sets, 1, &OverlayOptions::default()).unwrap();
    eprintln!(
        "  toy matrix: {} pairs in {:.1} s ({:.0} pairs/s)",
        report.pairs,
        started.elapsed().as_secs_f64(),
        report.pairs_per_second()
    );
    let split = split_dataset(500, (0.8, 0.1, 0.1), 5).unwrap();
    Learning { mols, matrix, split }
}

fn train(data: &Learning, kind: EncoderKind, train_idx: &[usize], seed: u64) -> (FitOutcome, Vec<MolInput>) {
    let mut model = Model::new(ModelConfig::small().with_kind(kind), seed).unwrap();
    let inputs: Vec<MolInput> = data.mols.iter().map(|g| model.prepare(g)).collect();
    let split = SplitSpec {
        train: train_idx.to_vec(),
        ..data.split.clone()
    };
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let started = Instant::now();
    let out = fit(&mut model, &inputs, &data.matrix, &split, &cfg).unwrap();
    eprintln!(
        "  {kind:?} seed {seed} on {} molecules: {} epochs, best {} ({:.1} s)",
        train_idx.len(),
        out.history.len(),
        out.best_epoch,
        started.elapsed().as_secs_f64()
    );
    (out, inputs)
}

fn test_r(data: &Learning, model: &Model, inputs: &[MolInput]) -> f64 {
    evaluate(model, inputs, &data.matrix, &data.split.test, 1).unwrap().shape.pearson_r
}

fn criterion_5(data: &Learning, gnn: &(FitOutcome, Vec<MolInput>)) -> Outcome {
    let sizes = (data.split.train.len(), data.split.val.len(), data.split.test.len());
    let r_gnn = test_r(data, &gnn.0.best, &gnn.1);
    let (ecfp, ecfp_inputs) = train(data, EncoderKind::Ecfp, &data.split.train, 0);
    let r_ecfp = test_r(data, &ecfp.best, &ecfp_inputs);
    let fps: Vec<_> = data.mols.iter().map(|g| morgan_fingerprint(g, 2, 2048)).collect();
    let r_null = null_baseline(&data.matrix, &fps, &data.split.test).unwrap().shape.pearson_r;
    outcome(
        sizes == (400, 50, 50) && r_gnn >= LEARNING_R_MIN && r_gnn > r_ecfp && r_gnn > r_null,
        format!("split {sizes:?}; test shape r: GNN {r_gnn:.3} (>= {LEARNING_R_MIN}), ECFP MLP {r_ecfp:.3}, 2D Tanimoto {r_null:.3}"),
    )
}

fn criterion_6(data: &Learning, gnn: &(FitOutcome, Vec<MolInput>)) -> Outcome {
    let small: Vec<usize> = data.split.train[..100].to_vec();
    let mut rows = Vec::new();
    let mut ok = 0;
    for seed in 0..3u64 {
        let r_400 = if seed == 0 {
            test_r(data, &gnn.0.best, &gnn.1)
        } else {
            let (o, i) = train(data, EncoderKind::Gnn, &data.split.train, seed);
            test_r(data, &o.best, &i)
        };
        let (o, i) = train(data, EncoderKind::Gnn, &small, seed);
        let r_100 = test_r(data, &o.best, &i);
        if r_400 >= r_100 {
            ok += 1;
        }
        rows.push(format!("seed {seed}: r(100) {r_100:.3}, r(400) {r_400:.3}"));
    }
    outcome(ok >= 2, format!("{}; non-decreasing in {ok}/3 seeds (>= 2)", rows.join("; ")))
}

fn fd_check(inputs: &[Tensor<f64>], f: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var) -> f64 {
    let eval = |xs: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.param(x.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (k, x) in inputs.iter().enumerate() {
        let g = grads.get_or_zeros(vars[k], x);
        let mut diff: f64 = 0.0;
        let mut scale: f64 = g.max_abs();
        for e in 0..x.len() {
            let (mut plus, mut minus) = (inputs.to_vec(), inputs.to_vec());
            plus[k].data_mut()[e] += h;
            minus[k].data_mut()[e] -= h;
            let n = (eval(&plus) - eval(&minus)) / (2.0 * h);
            diff = diff.max((g.data()[e] - n).abs());
            scale = scale.max(n.abs());
        }
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut rand_t = |r: usize, c: usize| Tensor::<f64>::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let mut worst_kernel: f64 = 0.0;
    let mut worst_loss: f64 = 0.0;
    for trial in 0..5 {
        let z = rand_t(4, 16);
        let w = rand_t(4, 4);
        worst_kernel = worst_kernel.max(fd_check(&[z], &|t, v| {
            let k = tanimoto_kernel_matrix(t, v[0]).unwrap();
            let wc = t.constant(w.clone());
            let p = t.mul(k, wc).unwrap();
            t.sum_all(p)
        }));
        let raw = rand_t(4, 4);
        let raw2 = rand_t(4, 4);
        let sym = |m: &Tensor<f64>| Tensor::from_fn(4, 4, |r, c| if r == c { 1.0 } else { m.get(r.min(c), r.max(c)).abs() });
        let (ts, tc) = (sym(&raw), sym(&raw2));
        let lambda = trial as f64 * 0.5;
        let zs = rand_t(4, 16);
        let zc = rand_t(4, 16);
        worst_loss = worst_loss.max(fd_check(&[zs, zc], &|t, v| {
            pairwise_loss(t, v[0], v[1], &ts, &tc, lambda).unwrap().total
        }));
    }
    outcome(
        worst_kernel < KERNEL_LOSS_GRAD_REL_MAX && worst_loss < KERNEL_LOSS_GRAD_REL_MAX,
        format!("N=4 batches: kernel {worst_kernel:.2e}, loss {worst_loss:.2e} (< {KERNEL_LOSS_GRAD_REL_MAX:e})"),
    )
}

fn criterion_8(data: &Learning, gnn: &(FitOutcome, Vec<MolInput>)) -> Outcome {
    let test = &data.split.test;
    let refs: Vec<&MolInput> = test.iter().map(|&i| &gnn.1[i]).collect();
    let emb = gnn.0.best.embed(&refs, 64).unwrap();
    let fps: Vec<_> = test.iter().map(|&i| morgan_fingerprint(&data.mols[i], 2, 2048)).collect();
    let (mut dz, mut dfp, mut truth) = (Vec::new(), Vec::new(), Vec::new());
    for a in 0..test.len() {
        for b in a + 1..test.len() {
            let d: f64 = emb[a]
                .z_shape
                .iter()
                .zip(&emb[b].z_shape)
                .map(|(x, y)| ((x - y) as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            dz.push(d);
            dfp.push(1.0 - tanimoto_2d(&fps[a], &fps[b]).unwrap());
            truth.push(data.matrix.shape_at(test[a], test[b]) as f64);
        }
    }
    let rho = spearman(&dz, &truth);
    let rho_fp = spearman(&dfp, &truth);
    outcome(
        rho <= SPEARMAN_MAX && rho < rho_fp,
        format!("Spearman(z_shape distance, ShapeTanimoto) {rho:.3} (<= {SPEARMAN_MAX}); fingerprint distance {rho_fp:.3}"),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mols = toy_molecules(10, 9009);
    let model = Model::new(ModelConfig::small(), 9).unwrap();
    let mut fp_ok = true;
    let mut worst_h: f32 = 0.0;
    for g in &mols {
        let fp = morgan_fingerprint(g, 2, 2048);
        let h = model.encode(&model.prepare(g)).unwrap();
        let mut order: Vec<usize> = (0..g.atom_count()).collect();
        for _ in 0..100 {
            order.shuffle(&mut rng);
            let p = g.permuted(&order).unwrap();
            fp_ok &= morgan_fingerprint(&p, 2, 2048) == fp;
            let hp = model.encode(&model.prepare(&p)).unwrap();
            worst_h = h.iter().zip(&hp).fold(worst_h, |m, (a, b)| m.max((a - b).abs()));
        }
    }
    let mut worst_d: f64 = 0.0;
    for s in conformer_sets(&mols, 1) {
        let c = &s.conformers[0];
        let d = shape_descriptors(c);
        for _ in 0..10 {
            let rot: Matrix3<f64> = random_rotation(&mut rng).to_rotation_matrix().into_inner();
            let moved = shape_descriptors(&c.transformed(&rot, &random_translation(&mut rng, 10.0)));
            worst_d = worst_d.max((moved.radius_of_gyration - d.radius_of_gyration).abs());
            for k in 0..3 {
                worst_d = worst_d.max((moved.principal_moments[k] - d.principal_moments[k]).abs());
            }
        }
    }
    outcome(
        fp_ok && worst_h <= ENCODING_INVARIANCE && worst_d <= DESCRIPTOR_INVARIANCE,
        format!("fingerprints identical: {fp_ok}; max encoding change {worst_h:.2e} (<= {ENCODING_INVARIANCE:e}); max descriptor change {worst_d:.2e} (<= {DESCRIPTOR_INVARIANCE:e})"),
    )
}

fn criterion_10(data: &Learning, gnn: &(FitOutcome, Vec<MolInput>)) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mpath = dir.path().join("toy.mcls");
    save_matrix(&data.matrix, &mpath).unwrap();
    let matrix_ok = load_matrix(&mpath).unwrap() == data.matrix;
    let bytes = std::fs::read(&mpath).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut flips = 0;
    let mut rejected = 0;
    let mut positions: Vec<usize> = (0..64.min(bytes.len())).collect();
    positions.extend((0..256).map(|_| rng.gen_range(0..bytes.len())));
    positions.push(bytes.len() - 1);
    for &k in &positions {
        let mut bad = bytes.clone();
        bad[k] ^= 1 << rng.gen_range(0..8);
        flips += 1;
        rejected += matches!(matrix_from_bytes(&bad), Err(DataError::ChecksumMismatch)) as usize;
    }
    let cpath = dir.path().join("model.mckp");
    let ckpt = gnn.0.best.to_checkpoint(serde_json::json!({"best_epoch": gnn.0.best_epoch}));
    save_checkpoint(&ckpt, &cpath).unwrap();
    let loaded = load_checkpoint(&cpath).unwrap();
    let model = Model::from_checkpoint(&loaded).unwrap();
    let ckpt_ok = loaded == ckpt && model.params == gnn.0.best.params && model.running == gnn.0.best.running;
    let cbytes = std::fs::read(&cpath).unwrap();
    let mut positions: Vec<usize> = (0..64).collect();
    positions.extend((0..256).map(|_| rng.gen_range(0..cbytes.len())));
    positions.push(cbytes.len() - 1);
    for &k in &positions {
        let mut bad = cbytes.clone();
        bad[k] ^= 1 << rng.gen_range(0..8);
        flips += 1;
        rejected += matches!(Checkpoint::from_bytes(&bad), Err(TensorError::ChecksumMismatch)) as usize;
    }
    let truncated = matches!(matrix_from_bytes(&bytes[..bytes.len() - 3]), Err(DataError::ChecksumMismatch))
        && matches!(Checkpoint::from_bytes(&cbytes[..cbytes.len() / 2]), Err(TensorError::ChecksumMismatch));
    outcome(
        matrix_ok && ckpt_ok && rejected == flips && truncated,
        format!("MCLS identity {matrix_ok}; checkpoint identity {ckpt_ok}; corrupted fixtures rejected {rejected}/{flips}; truncations rejected {truncated}"),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} {:<4} {name}: {} [{secs:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };
    run(1, "overlay correctness", &mut criterion_1);
    run(2, "overlay gradients", &mut criterion_2);
    run(3, "closed-form single pair", &mut criterion_3);
    run(4, "matrix generation", &mut criterion_4);
    let data = learning_data();
    let gnn = train(&data, EncoderKind::Gnn, &data.split.train, 0);
    run(5, "learning smoke reproduction", &mut || criterion_5(&data, &gnn));
    run(6, "data-size trend", &mut || criterion_6(&data, &gnn));
    run(7, "kernel and loss gradients", &mut criterion_7);
    run(8, "embedding geometry", &mut || criterion_8(&data, &gnn));
    run(9, "invariance suite", &mut criterion_9);
    run(10, "format round trips", &mut || criterion_10(&data, &gnn));
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
