use npendulum::*;

fn main() {
    // criterion-7 setup
    let p = PendulumParams::new(vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
    let w = validate_winding(&[1, 0]).unwrap();
    let f = Forcing::new(1.0, vec![vec![Harmonic { k: 1, cos_amp: 0.0, sin_amp: 0.1 }], vec![]]).unwrap();
    let model = ActionModel::new(p.clone(), f.clone(), w.clone(), 1.0, 32, 256).unwrap();
    let opts = SolverOptions::default();
    let seeds = seed_plan(&model, &opts);
    let mut outcomes = std::collections::BTreeMap::new();
    for s in &seeds {
        let res = minimize(&model, s, &opts);
        *outcomes.entry(format!("{:?}", res.outcome)).or_insert(0usize) += 1;
        if s.id < 12 {
            println!("seed {:2} mask {} xbar {:?} -> {:?} iters {} value {:.12} grad {:.3e}",
                s.id, s.sine_mask,
                s.loop_path.xbar().iter().map(|x| (x*100.0).round()/100.0).collect::<Vec<_>>(),
                res.outcome, res.iterations, res.value, res.grad_norm);
        }
        if res.outcome == MinimizeOutcome::Converged {
            let lp = model.unpack(&res.x);
            let cert = certify(&p, &f, &lp, 4096).unwrap();
            println!("  converged seed {}: action {:.9} defect {:.3e} (thr {:.1e}) resid {:.3e} (thr {:.1e}) pass {}",
                s.id, res.value, cert.defect, cert.defect_threshold, cert.max_residual, cert.residual_threshold, cert.pass);
        }
    }
    println!("{outcomes:?}");
}
