// Scratch exploration of the acceptance configurations (not part of the build).
use cqed_sim::model::{DqdParams, ProbeParams, ResonatorParams, SystemConfig};
use cqed_sim::operators::HilbertLayout;
use cqed_sim::steady::{linspace, photon_number, spectrum_trace, steady_state, LiouvillianFamily};
use num_complex::Complex64;
use std::time::Instant;

fn fig2b_config(alpha: f64) -> SystemConfig {
    SystemConfig {
        resonator: ResonatorParams { omega_r: 5170.0, kappa_int: 17.0, kappa_ext: 6.1 },
        dqds: vec![DqdParams { delta: 0.0, t: 5166.0 / 2.0, gamma1: 2.0 * 5.3, gamma_phi: 0.0 }],
        couplings: vec![53.4],
        probe: ProbeParams { omega_p: 5170.0, alpha: Complex64::new(alpha, 0.0) },
        layout: HilbertLayout { fock_cutoff: 5, num_qubits: 1 },
        rwa: true,
    }
}

fn add_dqd2(mut c: SystemConfig) -> SystemConfig {
    c.dqds.push(DqdParams { delta: 0.0, t: 5156.2 / 2.0, gamma1: 2.0 * 6.0, gamma_phi: 0.0 });
    c.couplings.push(56.7);
    c.layout.num_qubits = 2;
    c
}

fn local_minima(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let mut out = vec![];
    for i in 1..y.len() - 1 {
        if y[i] < y[i - 1] && y[i] <= y[i + 1] {
            out.push((x[i], y[i]));
        }
    }
    out
}

fn main() {
    // 1) AC-2 doublet
    let grid = linspace(5050.0, 5290.0, 481); // 0.5 MHz
    for alpha in [0.1, 0.5, 1.0, 2.56] {
        let c = fig2b_config(alpha);
        let t0 = Instant::now();
        let tr = spectrum_trace(&c, &grid).unwrap();
        let dt = t0.elapsed();
        let m = local_minima(&tr.probe_freqs, &tr.abs());
        let fam = LiouvillianFamily::new(&c).unwrap();
        let rho = steady_state(&fam.liouvillian_at(5170.0)).unwrap();
        let n_center = photon_number(&rho, &c);
        let rho_dip = steady_state(&fam.liouvillian_at(5170.0 - 53.4)).unwrap();
        let n_dip = photon_number(&rho_dip, &c);
        println!(
            "AC2 alpha={alpha}: minima {:?} sep {:.2} | n(center)={:.4} n(dip)={:.4} | trace {:?}",
            m.iter().map(|p| p.0).collect::<Vec<_>>(),
            if m.len() >= 2 { m.last().unwrap().0 - m[0].0 } else { f64::NAN },
            n_center, n_dip, dt
        );
    }

    // bare-cavity photon number for alpha choices
    for alpha in [0.1, 0.5, 1.0, 2.0, 2.56] {
        let mut c = fig2b_config(alpha);
        c.dqds.clear();
        c.couplings.clear();
        c.layout.num_qubits = 0;
        c.layout.fock_cutoff = 12;
        let fam = LiouvillianFamily::new(&c).unwrap();
        let rho = steady_state(&fam.liouvillian_at(5170.0)).unwrap();
        println!("bare cavity alpha={alpha}: n_res = {:.4}", photon_number(&rho, &c));
    }

    // 2) AC-3 two-qubit outer separation
    let c2 = add_dqd2(fig2b_config(0.5));
    let t0 = Instant::now();
    let tr = spectrum_trace(&c2, &grid).unwrap();
    println!("AC3 trace time {:?}", t0.elapsed());
    let m = local_minima(&tr.probe_freqs, &tr.abs());
    println!(
        "AC3 minima: {:?}, outer sep {:.2} (expect 155.8)",
        m.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(),
        m.last().unwrap().0 - m[0].0
    );

    // 3) AC-4 dark state: symmetric and asymmetric couplings
    for (g1, g2, gam1, gam2) in [(55.0, 55.0, 5.0, 5.0), (34.0, 69.0, 4.6, 6.3)] {
        let nu_r = 5170.0;
        let c = SystemConfig {
            resonator: ResonatorParams { omega_r: nu_r, kappa_int: 17.0, kappa_ext: 6.1 },
            dqds: vec![
                DqdParams { delta: 0.0, t: nu_r / 2.0, gamma1: 2.0 * gam1, gamma_phi: 0.0 },
                DqdParams { delta: 0.0, t: nu_r / 2.0, gamma1: 2.0 * gam2, gamma_phi: 0.0 },
            ],
            couplings: vec![g1, g2],
            probe: ProbeParams { omega_p: nu_r, alpha: Complex64::new(0.5, 0.0) },
            layout: HilbertLayout { fock_cutoff: 5, num_qubits: 2 },
            rwa: true,
        };
        let gc = (g1 * g1 + g2 * g2_f(g2)).sqrt();
        let tr = spectrum_trace(&c, &linspace(nu_r - 150.0, nu_r + 150.0, 601)).unwrap();
        let abs = tr.abs();
        let center_idx = 300;
        let center_depth = 1.0 - abs[center_idx];
        let bright_depth = abs.iter().map(|v| 1.0 - v).fold(0.0, f64::max);
        println!(
            "AC4 g=({g1},{g2}): gc={gc:.1} center depth {:.5} bright {:.5} ratio {:.4}",
            center_depth, bright_depth, center_depth / bright_depth
        );
        let m = local_minima(&tr.probe_freqs, &abs);
        println!("  minima at {:?}", m.iter().map(|p| p.0).collect::<Vec<_>>());
    }

    // 4) Fock convergence 5→6 at several drive strengths (two-qubit config)
    for alpha in [0.5, 1.0, 2.0, 2.56, 3.3] {
        let mut c = add_dqd2(fig2b_config(alpha));
        c.layout.fock_cutoff = 5;
        let conv = cqed_sim::steady::fock_convergence(&c, 5170.0 - 77.9).unwrap();
        let mut c12 = c.clone();
        c12.layout.fock_cutoff = 12;
        let fam = LiouvillianFamily::new(&c12).unwrap();
        let rho = steady_state(&fam.liouvillian_at(5170.0 - 77.9)).unwrap();
        println!(
            "fock conv alpha={alpha}: |S11| change {:.2e}, n change {:.2e}, n12={:.3}",
            conv.s11_abs_change, conv.photon_rel_change, photon_number(&rho, &c12)
        );
    }

    // bare cavity fock convergence at n≈0.3 and 0.5 (worst case: no qubits)
    for n_target in [0.3, 0.5] {
        let kappa_tot: f64 = 23.1;
        let kappa_ext: f64 = 6.1;
        let alpha = (n_target * (kappa_tot / 2.0).powi(2) / kappa_ext).sqrt();
        let mut c = fig2b_config(alpha);
        c.dqds.clear();
        c.couplings.clear();
        c.layout.num_qubits = 0;
        let conv = cqed_sim::steady::fock_convergence(&c, 5170.0).unwrap();
        println!(
            "bare fock conv n={n_target} (alpha={alpha:.3}): |S11| change {:.2e}",
            conv.s11_abs_change
        );
    }

    // 5) weak-drive linearity on fig2b config
    for alpha in [0.2, 0.5, 1.0, 2.56] {
        let c_full = fig2b_config(alpha);
        let c_half = fig2b_config(alpha / 2.0);
        let g3 = linspace(5050.0, 5290.0, 49);
        let t_full = spectrum_trace(&c_full, &g3).unwrap();
        let t_half = spectrum_trace(&c_half, &g3).unwrap();
        let worst = t_full
            .s11
            .iter()
            .zip(t_half.s11.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        println!("linearity alpha={alpha}: max |S11 diff| {:.2e}", worst);
    }

    // timing of the d=20 and d=24 solves
    let c2 = add_dqd2(fig2b_config(0.5));
    let fam = LiouvillianFamily::new(&c2).unwrap();
    let t0 = Instant::now();
    let liou = fam.liouvillian_at(5170.0);
    let build = t0.elapsed();
    let t0 = Instant::now();
    let _rho = steady_state(&liou).unwrap();
    println!("d=20: build {:?}, solve {:?}", build, t0.elapsed());
    let mut c24 = c2.clone();
    c24.layout.fock_cutoff = 6;
    let fam = LiouvillianFamily::new(&c24).unwrap();
    let t0 = Instant::now();
    let liou = fam.liouvillian_at(5170.0);
    let build = t0.elapsed();
    let t0 = Instant::now();
    let _rho = steady_state(&liou).unwrap();
    println!("d=24: build {:?}, solve {:?}", build, t0.elapsed());
}

fn g2_f(g2: f64) -> f64 {
    g2
}
