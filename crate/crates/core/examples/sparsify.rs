//! Prune a dense model's recurrent kernels and report what was kept.

use rtvc::nn::Recurrent;
use rtvc::runtime::{init_dense, Preset};

fn main() -> rtvc::Result<()> {
    let dense = init_dense(0, Preset::Toy)?;
    let sparse = dense.sparsify([0.5, 0.5, 0.7])?;
    let m = &sparse.cyclevae;
    for (name, net) in [("enc_phi", &m.enc_phi), ("enc_phi_tilde", &m.enc_phi_tilde), ("dec_theta", &m.dec_theta)] {
        let d: Vec<String> = net.gru.u.iter().map(|u| format!("{:.3}", density(u))).collect();
        println!("{name:<14} r/z/n densities {}", d.join(" / "));
    }
    let main = &sparse.vocoder.weights().gru.u;
    println!("vocoder main GRU block densities {:.3} / {:.3} / {:.3}", density(&main[0]), density(&main[1]), density(&main[2]));
    Ok(())
}

fn density(u: &Recurrent) -> f64 {
    let n = u.rows() * u.cols();
    u.nnz() as f64 / n as f64
}
