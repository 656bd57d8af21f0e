use std::path::Path;
use std::sync::Arc;
use ndarray::Array1;
use pareto_descent::data::{apply_schema_to_test, load_csv, split, DatasetSchema, GroupedDataset};
use pareto_descent::fairness::{build_objectives, evaluate_metrics, FairnessMetrics, FairnessNotion, LinearModelSpec, Penalty};
use pareto_descent::pdo::{run_pdo, PdoConfig};

fn jitter(dim: usize, seed: u64) -> Array1<f64> {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Array1::from_iter((0..dim).map(|_| rng.gen_range(-1e-3..1e-3)))
}

fn max_gap(m: &FairnessMetrics) -> f64 {
    let d: Vec<f64> = m.group_tpr.iter().flatten().copied().collect();
    let mut g = 0.0f64;
    for i in 0..d.len() { for j in (i+1)..d.len() { g = g.max((d[i]-d[j]).abs()); } }
    g
}

fn train_eo(train: &Arc<GroupedDataset>, eta: f64, iters: usize, k: usize, seed: u64, spec: &LinearModelSpec) -> Array1<f64> {
    let bundle = build_objectives(Some(FairnessNotion::Eo), spec, train.clone(), Penalty::Squared).unwrap();
    let cfg = PdoConfig { eta, outer_iters: iters, inner_iters: k, record_every: 10_000_000, ..PdoConfig::default() };
    run_pdo(&bundle, &jitter(train.num_features(), seed), &cfg).unwrap().final_w
}

fn train_base(train: &Arc<GroupedDataset>, spec: &LinearModelSpec) -> Array1<f64> {
    let bundle = build_objectives(None, spec, train.clone(), Penalty::Squared).unwrap();
    let cfg = PdoConfig { eta: 0.05, outer_iters: 1500, inner_iters: 5, record_every: 10_000_000, normalize_gradients: false, ..PdoConfig::default() };
    run_pdo(&bundle, &Array1::zeros(train.num_features()), &cfg).unwrap().final_w
}

fn main() {
    let svm = LinearModelSpec::smooth_hinge();
    let masters: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    for &master in &masters {
        let dir_str = format!("/tmp/ms{master}");
        let dir = Path::new(&dir_str);
        let (atrain_p, atest_p) = pareto_descent::synth::write_adult_like(dir, master).unwrap();
        let compas_p = pareto_descent::synth::write_compas_like(dir, master).unwrap();

        // C1-2: adult gender, 3 training seeds
        let schema = DatasetSchema::from_toml_file(Path::new("schemas/adult_gender.toml")).unwrap();
        let (tr, enc) = load_csv(&atrain_p, &schema).unwrap();
        let te = apply_schema_to_test(&atest_p, &enc).unwrap();
        let tr = Arc::new(tr);
        let wb = train_base(&tr, &svm);
        let bte = evaluate_metrics(&wb, &te);
        let mut eo_deo = vec![];
        let mut eo_acc = vec![];
        for seed in 1..=3u64 {
            let w = train_eo(&tr, 0.01, 8000, 100, seed, &svm);
            let m = evaluate_metrics(&w, &te);
            eo_deo.push(m.deo);
            eo_acc.push(m.total_accuracy);
        }
        println!("m{master} GENDER base acc={:.4} deo={:.4} | eo acc={:.4} deo(mean)={:.4} per-seed={:?}",
            bte.total_accuracy, bte.deo,
            eo_acc.iter().sum::<f64>()/3.0, eo_deo.iter().sum::<f64>()/3.0,
            eo_deo.iter().map(|v| (v*1e4).round()/1e4).collect::<Vec<_>>());

        // C5: adult race
        let schema = DatasetSchema::from_toml_file(Path::new("schemas/adult_race.toml")).unwrap();
        let (tr, _enc) = load_csv(&atrain_p, &schema).unwrap();
        let tr = Arc::new(tr);
        let wb = train_base(&tr, &svm);
        let btr = evaluate_metrics(&wb, &tr);
        let w = train_eo(&tr, 0.01, 8000, 200, 1, &svm);
        let ftr = evaluate_metrics(&w, &tr);
        println!("m{master} RACE   base train acc={:.4} gap={:.4} | eo acc={:.4} gap={:.4}",
            btr.total_accuracy, max_gap(&btr), ftr.total_accuracy, max_gap(&ftr));

        // C3-4: compas sex + race, 3 split seeds
        for (schema_path, label) in [("schemas/compas_sex.toml", "C-SEX "), ("schemas/compas_race.toml", "C-RACE")] {
            let schema = DatasetSchema::from_toml_file(Path::new(schema_path)).unwrap();
            let (full, _) = load_csv(&compas_p, &schema).unwrap();
            let mut bdeo = vec![]; let mut fdeo = vec![]; let mut facc = vec![];
            for seed in 1..=3u64 {
                let (ctr, cte) = split(&full, 0.3, seed).unwrap();
                let ctr = Arc::new(ctr);
                let wb = train_base(&ctr, &svm);
                bdeo.push(evaluate_metrics(&wb, &cte).deo);
                let w = train_eo(&ctr, 0.01, 6000, 100, seed, &svm);
                let m = evaluate_metrics(&w, &cte);
                fdeo.push(m.deo); facc.push(m.total_accuracy);
            }
            println!("m{master} {label} base deo(mean)={:.4} | eo acc={:.4} deo(mean)={:.4} per-seed={:?}",
                bdeo.iter().sum::<f64>()/3.0, facc.iter().sum::<f64>()/3.0, fdeo.iter().sum::<f64>()/3.0,
                fdeo.iter().map(|v| (v*1e4).round()/1e4).collect::<Vec<_>>());
        }
    }
}
