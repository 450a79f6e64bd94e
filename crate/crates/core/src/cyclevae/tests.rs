use super::*;
use crate::dsp::MelFrame;
use crate::error::Error;
use crate::nn::gru::tests::oracle_step;
use crate::nn::{GruWeights, Linear, Matrix, SegConvSpec};
use crate::rng::{RngStream, Site};

fn toy(fine_tuned: bool, seed: u64) -> CycleVaeModel {
    let cfg = CycleVaeConfig {
        fine_tuned,
        ..CycleVaeConfig::toy()
    };
    CycleVaeModel::random(cfg, &mut RngStream::new(seed, Site::WeightInit)).unwrap()
}

fn mels(n: usize, dim: usize, seed: u64) -> Vec<MelFrame> {
    let mut rng = RngStream::with_stream_id(seed, 42);
    (0..n)
        .map(|t| MelFrame {
            values: (0..dim).map(|_| rng.symmetric(2.0) - 4.0).collect(),
            frame_index: t,
        })
        .collect()
}

fn window(frames: &[&MelFrame]) -> Vec<f32> {
    frames.iter().flat_map(|f| f.values.iter().copied()).collect()
}

/// Scalar f64 trace of segconv, GRU and head.
fn trace(net: &SegGru, h: &mut Vec<f32>, concat: &[f32]) -> Vec<f64> {
    let k = &net.conv.kernel;
    let conv: Vec<f32> = (0..k.rows)
        .map(|r| {
            let mut acc = net.conv.bias[r] as f64;
            for c in 0..k.cols {
                acc += k.get(r, c) as f64 * concat[c] as f64;
            }
            acc as f32
        })
        .collect();
    let next = oracle_step(&net.gru, h, &conv);
    *h = next.iter().map(|&v| v as f32).collect();
    let w = &net.head.weight;
    (0..w.rows)
        .map(|r| net.head.bias[r] as f64 + (0..w.cols).map(|c| w.get(r, c) as f64 * next[c]).sum::<f64>())
        .collect()
}

fn softplus64(x: f64) -> f64 {
    x.exp().ln_1p().max(1e-6)
}

#[test]
fn encode_shapes_positivity_and_determinism() {
    let m = toy(true, 1);
    let x = mels(5, 80, 0);
    let w = window(&x.iter().collect::<Vec<_>>());
    let run = || {
        let mut st = m.encoder_state();
        let mut rz = RngStream::new(9, Site::EncoderZ);
        let mut rzt = RngStream::new(9, Site::EncoderZTilde);
        m.encode(&mut st, &w, &mut rz, &mut rzt).unwrap()
    };
    let a = run();
    assert_eq!(a.latents.z.len(), m.config.z_dim);
    assert_eq!(a.latents.z_tilde.len(), m.config.zt_dim);
    assert!(a.latents.sigma_z.iter().chain(&a.latents.sigma_zt).all(|&s| s > 0.0));
    let l = &a.latents;
    for i in 0..l.z.len() {
        let z = l.mu_z[i] as f64 - l.sigma_z[i] as f64 * l.eps_z[i] as f64;
        assert!((l.z[i] as f64 - z).abs() < 1e-6);
    }
    assert!((a.spk_post_phi.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    assert_eq!(a, run());
    let mut st = m.encoder_state();
    let mut r = RngStream::new(0, Site::EncoderZ);
    let err = m.encode(&mut st, &w[1..], &mut r.clone(), &mut r);
    assert!(matches!(err, Err(Error::Dimension { .. })));
}

fn hand_model(fine_tuned: bool) -> CycleVaeModel {
    let cfg = CycleVaeConfig {
        mel_dim: 1,
        z_dim: 1,
        zt_dim: 1,
        n_speakers: 2,
        spk_emb_dim: 1,
        conv_dim: 1,
        enc_hidden: 2,
        dec_hidden: 2,
        exc_hidden: 2,
        cls_hidden: 2,
        fine_tuned,
        ..CycleVaeConfig::toy()
    };
    let mut rng = RngStream::with_stream_id(3, 3);
    let mut m = CycleVaeModel::random(cfg, &mut rng).unwrap();
    m.speaker_table = Matrix::from_vec(1, 2, vec![0.5, -1.5]).unwrap();
    m
}

#[test]
fn encoder_matches_scalar_trace() {
    let m = hand_model(true);
    let x: Vec<f32> = vec![0.3, -0.2, 0.7, 0.1, -0.5];
    let mut st = m.encoder_state();
    let mut h = vec![0.0f32; 2];
    let mut ht = vec![0.0f32; 2];
    let mut r = RngStream::new(1, Site::EncoderZ);
    for step in 0..3 {
        let w: Vec<f32> = x.iter().map(|v| v + step as f32 * 0.1).collect();
        let e = m.encode(&mut st, &w, &mut r.clone(), &mut r).unwrap();
        let o = trace(&m.enc_phi, &mut h, &w);
        let ot = trace(&m.enc_phi_tilde, &mut ht, &w);
        assert!((e.latents.mu_z[0] as f64 - o[0]).abs() < 1e-5);
        assert!((e.latents.sigma_z[0] as f64 - softplus64(o[1])).abs() < 1e-5);
        assert!((e.latents.mu_zt[0] as f64 - ot[0]).abs() < 1e-5);
        let (a, b) = (o[2].exp(), o[3].exp());
        assert!((e.spk_post_phi[0] as f64 - a / (a + b)).abs() < 1e-5);
    }
}

#[test]
fn decoders_match_scalar_trace() {
    let m = hand_model(false);
    let code = m.code(1).unwrap();
    let exc = ExcitationFrame::new(5.0, true, vec![0.2, 0.4]).unwrap();
    let mut st = m.decoder_state();
    let mut xs = m.excitation_state().unwrap();
    let mut hist: Vec<Vec<f32>> = Vec::new();
    let mut xhist: Vec<Vec<f32>> = Vec::new();
    let (mut h, mut xh) = (vec![0.0f32; 2], vec![0.0f32; 2]);
    let mut rng = RngStream::new(2, Site::DecoderMel);
    for t in 0..4usize {
        let (z, zt) = ([0.1 * t as f32], [-0.3 + 0.2 * t as f32]);
        let out = m.decode_spectral(&mut st, &z, &zt, &code, Some(&exc), &mut rng).unwrap();
        let est = m.decode_excitation(&mut xs, &zt, &code).unwrap();

        hist.push(vec![z[0], zt[0], -1.5, 5.0, 1.0, 0.2, 0.4]);
        xhist.push(vec![zt[0], -1.5]);
        // left edge repeats the first frame
        let pad = |hs: &Vec<Vec<f32>>| -> Vec<f32> {
            (0..5).flat_map(|k| hs[(t + k).saturating_sub(4)].clone()).collect()
        };
        let o = trace(&m.dec_theta, &mut h, &pad(&hist));
        assert!((out.mu[0] as f64 - o[0]).abs() < 1e-5);
        assert!((out.sigma[0] as f64 - softplus64(o[1])).abs() < 1e-5);
        let e = trace(m.dec_theta_tilde.as_ref().unwrap(), &mut xh, &pad(&xhist));
        assert!((est.lf0_mu as f64 - e[0]).abs() < 1e-5);
        assert!((est.voicing_prob as f64 - 1.0 / (1.0 + (-e[2]).exp())).abs() < 1e-5);
        assert!((est.ap_mu[1] as f64 - e[4]).abs() < 1e-5);
        assert!((est.ap_sigma[0] as f64 - softplus64(e[5])).abs() < 1e-5);
    }
}

#[test]
fn wiring_errors() {
    let ft = toy(true, 1);
    let pre = toy(false, 1);
    let z = vec![0.0; 4];
    let c = ft.code(0).unwrap();
    let exc = ExcitationFrame::new(5.0, true, vec![0.0, 0.0]).unwrap();
    let mut r = RngStream::new(0, Site::DecoderMel);
    let err = ft.decode_spectral(&mut ft.decoder_state(), &z, &z, &c, Some(&exc), &mut r);
    assert!(matches!(err, Err(Error::Config(_))));
    let err = pre.decode_spectral(&mut pre.decoder_state(), &z, &z, &c, None, &mut r);
    assert!(matches!(err, Err(Error::Config(_))));
    assert!(matches!(ft.excitation_state(), Err(Error::Config(_))));
    assert!(ft.dec_theta_tilde.is_none());
    let mut bad = ft.clone();
    bad.dec_theta_tilde = pre.dec_theta_tilde.clone();
    assert!(bad.validate().is_err());
}

#[test]
fn speaker_codes_change_the_mean_and_sigma_is_floored() {
    let mut m = toy(true, 4);
    let z = vec![0.3; 4];
    let mut r = RngStream::new(0, Site::DecoderMel);
    let a = m.decode_spectral(&mut m.decoder_state(), &z, &z, &m.code(0).unwrap(), None, &mut r).unwrap();
    let b = m.decode_spectral(&mut m.decoder_state(), &z, &z, &m.code(1).unwrap(), None, &mut r).unwrap();
    assert!(a.mu.iter().zip(&b.mu).any(|(x, y)| x != y));
    let d = m.config.mel_dim;
    for b in &mut m.dec_theta.head.bias[d..] {
        *b = -200.0;
    }
    m.dec_theta.head.weight = Matrix::zeros(2 * d, m.config.dec_hidden);
    let out = m.decode_spectral(&mut m.decoder_state(), &z, &z, &m.code(0).unwrap(), None, &mut r).unwrap();
    assert!(out.sigma.iter().all(|&s| s == SIGMA_FLOOR));
}

#[test]
fn excitation_estimate_is_deterministic_and_bounded() {
    let m = toy(false, 6);
    let zt = vec![0.5; 4];
    let c = m.code(2).unwrap();
    let a = m.decode_excitation(&mut m.excitation_state().unwrap(), &zt, &c).unwrap();
    let b = m.decode_excitation(&mut m.excitation_state().unwrap(), &zt, &c).unwrap();
    assert_eq!(a, b);
    assert!((0.0..=1.0).contains(&a.voicing_prob));
    assert_eq!(a.ap_mu.len(), 2);
}

#[test]
fn classifier_posterior() {
    let m = toy(true, 7);
    let x = mels(5, 80, 1);
    let w = window(&x.iter().collect::<Vec<_>>());
    let p = m.classify_speaker(&mut m.classifier_state(), &w).unwrap();
    assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);

    let mut shifted = m.clone();
    for b in &mut shifted.classifier.head.bias {
        *b += 3.0;
    }
    let q = shifted.classify_speaker(&mut shifted.classifier_state(), &w).unwrap();
    let argmax = |v: &[f32]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(argmax(&p), argmax(&q));

    let one = CycleVaeConfig {
        n_speakers: 1,
        ..CycleVaeConfig::toy()
    };
    let m1 = CycleVaeModel::random(one, &mut RngStream::new(0, Site::WeightInit)).unwrap();
    assert_eq!(m1.classify_speaker(&mut m1.classifier_state(), &w).unwrap(), vec![1.0]);
}

#[test]
fn converter_primes_one_frame_then_emits_one_per_input() {
    let m = toy(true, 8);
    let x = mels(6, 80, 2);
    let mut c = Converter::new(&m, ConvertOptions::new(None, m.code(1).unwrap()), 5).unwrap();
    assert_eq!(c.lookahead(), 1);
    assert!(c.push(&x[0].values).unwrap().is_none());
    for (t, f) in x.iter().enumerate().skip(1) {
        assert_eq!(c.push(&f.values).unwrap().unwrap().frame_index, t - 1);
    }
    let tail = c.flush().unwrap();
    assert_eq!(tail.len(), 1);
    assert_eq!(tail[0].frame_index, 5);
    assert!(c.push(&x[0].values).is_err());
}

#[test]
fn convert_path_equals_manual_composition() {
    for fine_tuned in [true, false] {
        let m = toy(fine_tuned, 9);
        let x = mels(7, 80, 3);
        let (src, trg) = (m.code(0).unwrap(), m.code(2).unwrap());
        let out = convert_path(&m, &x, &ConvertOptions::new(Some(src.clone()), trg.clone()), 11).unwrap();
        assert_eq!(out.len(), x.len());

        let mut enc = m.encoder_state();
        let mut dec = m.decoder_state();
        let mut exc = (!fine_tuned).then(|| m.excitation_state().unwrap());
        let mut rz = RngStream::new(11, Site::EncoderZ);
        let mut rzt = RngStream::new(11, Site::EncoderZTilde);
        let mut rm = RngStream::new(11, Site::DecoderMel);
        let n = x.len() as isize;
        for t in 0..x.len() {
            let frames: Vec<&MelFrame> =
                (-3..=1).map(|k| &x[(t as isize + k).clamp(0, n - 1) as usize]).collect();
            let e = m.encode(&mut enc, &window(&frames), &mut rz, &mut rzt).unwrap();
            let ce = exc.as_mut().map(|st| {
                let est = m.decode_excitation(st, &e.latents.z_tilde, &src).unwrap();
                convert_lf0(&est.frame(), m.lf0_stats(&src), m.lf0_stats(&trg)).unwrap()
            });
            let d = m
                .decode_spectral(&mut dec, &e.latents.z, &e.latents.z_tilde, &trg, ce.as_ref(), &mut rm)
                .unwrap();
            assert_eq!(out[t].latents, e.latents);
            assert_eq!(out[t].converted, d);
            assert_eq!(out[t].converted_excitation, ce);
        }
    }
}

#[test]
fn conversion_is_deterministic_and_target_dependent() {
    let m = toy(true, 10);
    let x = mels(8, 80, 4);
    let run = |t: usize| convert_path(&m, &x, &ConvertOptions::new(None, m.code(t).unwrap()), 3).unwrap();
    assert_eq!(run(0), run(0));
    let (a, b) = (run(0), run(1));
    assert!(a.iter().zip(&b).any(|(p, q)| p.converted.mu != q.converted.mu));
}

#[test]
fn pretraining_requires_a_source_speaker() {
    let m = toy(false, 1);
    let err = Converter::new(&m, ConvertOptions::new(None, m.code(0).unwrap()), 0);
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn reconstruction_shares_latents_with_conversion() {
    let m = toy(true, 12);
    let x = mels(4, 80, 5);
    let mut o = ConvertOptions::new(Some(m.code(0).unwrap()), m.code(1).unwrap());
    let plain = convert_path(&m, &x, &o, 1).unwrap();
    o.reconstruct = true;
    o.classify = true;
    let full = convert_path(&m, &x, &o, 1).unwrap();
    for (p, f) in plain.iter().zip(&full) {
        assert_eq!(p.converted, f.converted);
        assert!(f.reconstructed.is_some());
        assert_eq!(f.spk_post_cls.as_ref().unwrap().len(), 3);
    }
}

#[test]
fn cyclic_path_feeds_sampled_output_back() {
    let m = toy(false, 13);
    let x = mels(6, 80, 6);
    let o = ConvertOptions::new(Some(m.code(0).unwrap()), m.code(2).unwrap());
    let cyc = cyclic_path(&m, &x, &o, 21, 1).unwrap();
    assert_eq!(cyc.passes.len(), 2);
    assert_eq!(cyc.converted(), &convert_path(&m, &x, &o, 21).unwrap()[..]);
    for f in cyc.converted().iter().chain(cyc.reconstructed()) {
        assert_eq!(f.converted.sample.len(), 80);
    }
    let y: Vec<MelFrame> = cyc.converted().iter().map(ConvertedFrame::mel).collect();
    let back = ConvertOptions {
        sites: PathSites::pass(1),
        ..ConvertOptions::new(Some(m.code(2).unwrap()), m.code(0).unwrap())
    };
    assert_eq!(cyc.reconstructed(), &convert_path(&m, &y, &back, 21).unwrap()[..]);
    assert_eq!(cyclic_path(&m, &x, &o, 21, 2).unwrap().passes.len(), 4);
}

/// Picks the current frame out of a window, then passes it through a GRU that
/// reduces to `tanh` and an identity head with the scale at its floor.
fn identity_like(net: &mut SegGru, current: usize, take: usize) {
    let d = net.conv.out_dim;
    let mut k = Matrix::zeros(d, net.conv.width());
    for i in 0..d.min(take) {
        k.set(i, current * net.conv.in_dim + i, 1.0);
    }
    net.conv = SegConvSpec::new(net.conv.p, net.conv.n, net.conv.in_dim, k, vec![0.0; d]).unwrap();
    let mut g = GruWeights::zeros(d, d);
    g.w[2] = Matrix::identity(d);
    g.b[1] = vec![-40.0; d];
    net.gru = g;
    let out = net.out_dim();
    let mut w = Matrix::zeros(out, d);
    for i in 0..d {
        w.set(i, i, 1.0);
    }
    let mut bias = vec![0.0; out];
    for b in bias.iter_mut().skip(d).take(d) {
        *b = -40.0;
    }
    net.head = Linear::new(w, bias).unwrap();
}

#[test]
fn cycle_through_identity_like_model_tracks_input_statistics() {
    let cfg = CycleVaeConfig {
        mel_dim: 2,
        z_dim: 2,
        zt_dim: 2,
        n_speakers: 2,
        spk_emb_dim: 1,
        conv_dim: 2,
        enc_hidden: 2,
        dec_hidden: 2,
        cls_hidden: 2,
        ..CycleVaeConfig::toy()
    };
    let mut m = CycleVaeModel::random(cfg, &mut RngStream::new(0, Site::WeightInit)).unwrap();
    identity_like(&mut m.enc_phi, 3, 2);
    identity_like(&mut m.enc_phi_tilde, 3, 2);
    identity_like(&mut m.dec_theta, 4, 2);
    let mut rng = RngStream::with_stream_id(77, 0);
    let x: Vec<MelFrame> = (0..400)
        .map(|t| MelFrame {
            values: vec![rng.symmetric(0.3), 0.1 + rng.symmetric(0.2)],
            frame_index: t,
        })
        .collect();
    let o = ConvertOptions::new(Some(m.code(0).unwrap()), m.code(1).unwrap());
    let cyc = cyclic_path(&m, &x, &o, 5, 1).unwrap();
    for d in 0..2 {
        let a: Vec<f64> = x.iter().map(|f| f.values[d] as f64).collect();
        let b: Vec<f64> = cyc.reconstructed().iter().map(|f| f.converted.sample[d] as f64).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        assert!(cov / (va * vb).sqrt() > 0.99, "dim {d}");
        assert!((ma - mb).abs() < 0.02, "dim {d}: {ma} vs {mb}");
        assert!((vb / va).sqrt() > 0.85, "dim {d}");
    }
}

#[test]
fn fine_tuning_drops_excitation_columns() {
    let pre = toy(false, 14);
    let ft = pre.clone().into_fine_tuned().unwrap();
    assert!(ft.dec_theta_tilde.is_none());
    assert_eq!(ft.dec_theta.in_dim(), ft.config.dec_in_dim());
    let x = mels(3, 80, 7);
    assert_eq!(convert_path(&ft, &x, &ConvertOptions::new(None, ft.code(1).unwrap()), 0).unwrap().len(), 3);
}

#[test]
fn paper_scale_shapes() {
    let m = CycleVaeModel::random(CycleVaeConfig::paper_scale(), &mut RngStream::new(0, Site::WeightInit)).unwrap();
    assert_eq!(m.enc_phi.hidden(), 512);
    assert_eq!(m.dec_theta.hidden(), 640);
    assert_eq!(m.classifier.hidden(), 32);
    for net in [&m.enc_phi, &m.enc_phi_tilde, &m.dec_theta] {
        assert!((net.gru.recurrent_density() - 0.75).abs() < 1e-3);
    }
}
