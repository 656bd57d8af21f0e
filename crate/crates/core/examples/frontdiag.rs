use std::path::Path;
use std::sync::Arc;
use ndarray::Array1;
use pareto_descent::data::{load_csv, DatasetSchema};
use pareto_descent::fairness::{build_objectives, FairnessNotion, LinearModelSpec, Penalty};
use pareto_descent::pbpdo::{run_pbpdo, PbpdoConfig, PreferenceVector};
use pareto_descent::pdo::{PdoConfig, StepMode};
use pareto_descent::frontier::merge_runs;

fn main() {
    let dir = Path::new("/tmp/ms17");
    let (atrain_p, _) = pareto_descent::synth::write_adult_like(dir, 17).unwrap();
    let schema = DatasetSchema::from_toml_file(Path::new("schemas/adult_gender.toml")).unwrap();
    let (tr, _) = load_csv(&atrain_p, &schema).unwrap();
    let tr = Arc::new(tr);
    let bundle = build_objectives(Some(FairnessNotion::Eo), &LinearModelSpec::logistic(), tr.clone(), Penalty::Squared).unwrap();
    let config = PbpdoConfig {
        base: PdoConfig { eta: 0.01, outer_iters: 8000, inner_iters: 100, record_every: 1, normalize_gradients: false, ..PdoConfig::default() },
        ..PbpdoConfig::default()
    };
    let w0 = {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        Array1::from_iter((0..tr.num_features()).map(|_| rng.gen_range(-1e-3..1e-3)))
    };
    let mut runs = Vec::new();
    for k in 0..10usize {
        let ratio = 10f64.powf(0.5 + 0.5 * k as f64);
        let pref = PreferenceVector::new(vec![1.0, ratio]).unwrap();
        let run = run_pbpdo(&bundle, &pref, &w0, &config).unwrap();
        let (mut main, mut prefm, mut kl) = (0, 0, 0);
        for p in &run.trajectory {
            match p.mode { StepMode::Main => main += 1, StepMode::Preference => prefm += 1, StepMode::KlOnly => kl += 1 }
        }
        let h = &run.trajectory.last().unwrap().objective_values;
        println!("R=1e{:.1}: main={main} pref={prefm} kl={kl}; terminal L={:.4} phi={:.3e}", 0.5+0.5*k as f64, h[0], h[1]);
        runs.push(run);
    }
    let merged = merge_runs(&runs).unwrap();
    println!("merged non-dominated: {}", merged.len());
}
