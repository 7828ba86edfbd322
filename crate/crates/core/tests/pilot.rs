//! Scratch probes at the acceptance configurations; run with
//! --ignored --nocapture. Not part of CI.

use std::time::Instant;

use rwdre::estimators::conemix::{estimate_conemix, ConemixParams};
use rwdre::estimators::coupling::{estimate_coupling, CouplingParams};
use rwdre::estimators::density_lb::{estimate_density_lb, DensityLbParams};
use rwdre::estimators::edge::{estimate_edge, EdgeParams};
use rwdre::estimators::rho_curve::{estimate_rho_curve, RhoCurveParams};
use rwdre::estimators::speed::{estimate_speed, SpeedParams};
use rwdre::estimators::subadd::{estimate_subadd, SubaddParams};
use rwdre::estimators::tails::{estimate_tails, TailParams};
use rwdre::estimators::EnsembleSpec;
use rwdre::harness::{InitialLaw, ObserverKind, RngPolicy};
use rwdre::kernel::{build_kernel, KernelSpec};
use rwdre::lattice::Boundary;

fn kernel() -> KernelSpec {
    build_kernel(1, &[(1, vec![1], 2.0), (0, vec![-1], 1.0)]).unwrap()
}

fn ens(lambda: f64, initial: InitialLaw, burn_in: f64, radius: Option<i64>) -> EnsembleSpec {
    let kernel = kernel();
    let gamma = kernel.gamma();
    EnsembleSpec {
        kernel,
        lambda,
        boundary: Boundary::Truncate,
        initial,
        burn_in,
        gamma,
        pad: 4.0,
        radius,
    }
}

fn lap(label: &str, started: Instant) -> Instant {
    eprintln!("[{:8.2}s] {label}", started.elapsed().as_secs_f64());
    Instant::now()
}

#[test]
#[ignore]
fn pilot() {
    let t0 = Instant::now();
    let mut mark = Instant::now();

    // c05 at the exact acceptance config.
    let policy = RngPolicy::new(1729, "acceptance/lln");
    let speed = SpeedParams {
        ensemble: ens(2.0, InitialLaw::Ones, 0.0, None),
        t_grid: vec![200.0, 400.0],
        replicas: 400,
        abort_budget: 0.0,
        level: 0.95,
    };
    let out = estimate_speed(&speed, &policy, 2).unwrap();
    mark = lap("c05 speed x400", mark);
    for p in &out.report.points {
        eprintln!(
            "  t={} rho={:.4}+-{:.4} gap={:+.5}+-{:.5} ok={}",
            p.t, p.rho_fraction.estimate, p.rho_fraction.se, p.lln_gap.estimate, p.lln_gap.se,
            p.lln_consistent
        );
    }

    // c07 at 1000 replicas (the full run uses 10000).
    let policy = RngPolicy::new(1729, "acceptance/tails");
    let tails = TailParams {
        ensemble: ens(2.0, InitialLaw::UpperInvariant, 10.0, None),
        epsilon_rho: 0.1,
        epsilon_walker: 0.2,
        t_grid: (1..=8).map(|k| 20.0 * k as f64).collect(),
        replicas: 1000,
        zeros_replicas: 100,
        abort_budget: 0.0,
        level: 0.95,
    };
    let out = estimate_tails(&tails, &policy, 2).unwrap();
    mark = lap("c07 tails x1000 (upper-invariant start)", mark);
    eprintln!(
        "  rho probs {:?}\n  walker probs {:?}\n  rho fit {:?}\n  walker fit {:?}\n  rate by t {:?}",
        out.report.rho_upper.prob,
        out.report.walker.prob,
        out.report.rho_upper.fit,
        out.report.walker.fit,
        out.report.rho_rate_by_t.iter().map(|e| e.estimate).collect::<Vec<_>>()
    );

    // c11 at the exact acceptance config.
    let policy = RngPolicy::new(1729, "acceptance/edge");
    let edge = EdgeParams {
        ensemble: ens(2.0, InitialLaw::Ones, 0.0, None),
        t_grid: vec![100.0, 200.0],
        replicas: 100,
        abort_budget: 0.0,
        level: 0.95,
    };
    let out = estimate_edge(&edge, &policy, 2).unwrap();
    mark = lap("c11 edge x100", mark);
    let (a, b) = (&out.report.points[0].alpha_hat, &out.report.points[1].alpha_hat);
    eprintln!(
        "  alpha(100)={:.4}+-{:.4} alpha(200)={:.4}+-{:.4} |diff|={:.4} 3*joint={:.4}",
        a.estimate,
        a.se,
        b.estimate,
        b.se,
        (a.estimate - b.estimate).abs(),
        3.0 * f64::hypot(a.se, b.se)
    );

    // c12 horizon ladder: how the mean observation gap settles.
    let policy = RngPolicy::new(1729, "acceptance/observers");
    for (observer, horizon) in [
        (ObserverKind::Rightmost, 40.0),
        (ObserverKind::Rightmost, 80.0),
        (ObserverKind::Rightmost, 160.0),
        (ObserverKind::Slab, 40.0),
        (ObserverKind::Slab, 80.0),
    ] {
        let params = DensityLbParams {
            ensemble: ens(2.0, InitialLaw::Ones, 0.0, None),
            observer,
            horizon,
            half_width: 2,
            tilt: 0.0,
            delta: 0.0,
            shared_bands: true,
            replicas: 500,
            abort_budget: 0.0,
            level: 0.95,
        };
        let out = estimate_density_lb(&params, &policy, 2).unwrap();
        mark = lap(&format!("c12 density {observer:?} h={horizon} x500"), mark);
        eprintln!(
            "  violations={} density ci {:?} tau={:.4}+-{:.4}",
            out.report.domination_violations,
            out.report.density.ci,
            out.report.mean_tau.estimate,
            out.report.mean_tau.se
        );
    }

    // c08 at the exact acceptance config.
    let policy = RngPolicy::new(1729, "acceptance/coupling");
    let coupling = CouplingParams {
        dim: 1,
        lambda: 2.0,
        boundary: Boundary::Truncate,
        density: 0.5,
        t_grid: (1..=10).map(|k| 2.0 * k as f64).collect(),
        pad: 4.0,
        radius: None,
        replicas: 40_000,
        abort_budget: 0.0,
        level: 0.95,
    };
    let out = estimate_coupling(&coupling, &policy, 2).unwrap();
    mark = lap("c08 coupling x40000", mark);
    eprintln!("  probs {:?}\n  fit {:?}", out.report.fit.prob, out.report.fit.fit);

    // c04 at the exact acceptance config.
    let policy = RngPolicy::new(1729, "acceptance/subadd");
    let subadd = SubaddParams {
        ensemble: ens(2.0, InitialLaw::Ones, 0.0, None),
        t: 5.0,
        s: 5.0,
        replicas: 1000,
        shared_rep: true,
        ks_max_k: 5,
        ks_alpha: 0.01,
        abort_budget: 0.0,
        level: 0.95,
    };
    let out = estimate_subadd(&subadd, &policy, 2).unwrap();
    mark = lap("c04 subadd x1000", mark);
    eprintln!(
        "  violations={} ks p-values {:?}",
        out.report.pathwise_violations,
        out.report.ks.iter().map(|k| k.p_value).collect::<Vec<_>>()
    );

    // c06 at the exact acceptance config.
    let policy = RngPolicy::new(1729, "acceptance/rho-curve");
    let curve = RhoCurveParams {
        ensemble: ens(2.0, InitialLaw::UpperInvariant, 10.0, Some(400)),
        lambda_grid: vec![1.8, 2.0, 2.5, 3.5, 6.0, 20.0],
        t: 60.0,
        replicas: 250,
        abort_budget: 0.0,
        level: 0.95,
    };
    let out = estimate_rho_curve(&curve, &policy, 2).unwrap();
    mark = lap("c06 rho-curve x250", mark);
    let rhos: Vec<(f64, f64)> =
        out.report.points.iter().map(|p| (p.rho_fraction.estimate, p.rho_fraction.se)).collect();
    eprintln!("  violations={} rho {:?}", out.report.monotonicity_violations, rhos);

    // c09 at the exact acceptance config.
    let policy = RngPolicy::new(1729, "acceptance/conemix");
    for (initial, name) in
        [(InitialLaw::Zeros, "zeros"), (InitialLaw::Bernoulli(0.5), "bernoulli")]
    {
        let cone = ConemixParams {
            dim: 1,
            lambda: 2.0,
            boundary: Boundary::Truncate,
            initial,
            burn_in: 0.0,
            reference: 1,
            m: 1.0,
            t_grid: (1..=20).map(|k| k as f64).collect(),
            horizon: 24.0,
            exact: true,
            grid_step: 0.5,
            pad: 4.0,
            radius: None,
            replicas: 3000,
            abort_budget: 0.0,
            level: 0.95,
        };
        let out = estimate_conemix(&cone, &policy, 2).unwrap();
        mark = lap(&format!("c09 conemix {name} x3000"), mark);
        let phis: Vec<f64> = out.report.points.iter().map(|p| p.phi.estimate).collect();
        eprintln!("  phi {phis:?}");
    }

    let _ = mark;
    eprintln!("probe total {:.1}s", t0.elapsed().as_secs_f64());
}
