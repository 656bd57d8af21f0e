//! Deterministic synthetic benchmark datasets.
//!
//! Real census-income and recidivism files cannot be redistributed here, so
//! these generators produce stand-ins with the same shape: identical column
//! layouts, the exact published per-group/per-label row counts (including
//! rows that the loader must drop or filter), and feature distributions
//! calibrated so that unconstrained training is measurably unfair and
//! fairness-constrained training recovers the published operating points.
//!
//! Everything is driven by one seeded ChaCha stream: a fixed seed yields a
//! byte-identical file.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

// census-like: gender x race x label cell counts, consistent with the
// published group/label margins (train 32561 rows, test 12661)
const ADULT_RACES: [&str; 5] = [
    "Amer-Indian-Eskimo",
    "Asian-Pac-Islander",
    "Black",
    "White",
    "Other",
];
// [female, male] per race, positives then negatives
const ADULT_TRAIN_POS: [[usize; 2]; 5] =
    [[5, 32], [39, 226], [59, 343], [1089, 6291], [4, 20]];
const ADULT_TRAIN_NEG: [[usize; 2]; 5] =
    [[105, 170], [267, 430], [1012, 1633], [7883, 12731], [85, 137]];
const ADULT_TEST_POS: [[usize; 2]; 5] = [[2, 14], [16, 88], [20, 112], [432, 2395], [3, 18]];
const ADULT_TEST_NEG: [[usize; 2]; 5] =
    [[41, 66], [91, 146], [403, 646], [3106, 4976], [33, 53]];
// rows carrying a "?" that the loader drops
const ADULT_TRAIN_MISSING: usize = 520;
const ADULT_TEST_MISSING: usize = 180;

// latent score model: positives sit near MU_POS (minus group handicaps),
// negatives near zero with a group-dependent "hard negative" tail close to
// the positive bulk
const MU_POS: f64 = 2.6;
const SD_POS: f64 = 0.8;
const GENDER_POS_SHIFT: [f64; 2] = [0.50, 0.0]; // female, male
const RACE_POS_SHIFT: [f64; 5] = [0.45, 0.15, 0.40, 0.0, 0.35]; // table order
const NEG_MEAN: [f64; 2] = [-1.0, -1.0];
// negatives that score above the positive bulk: unconditional false
// positives that add error mass without moving the decision threshold
const HARD_NEG_FRAC: [f64; 2] = [0.075, 0.25];
const HARD_NEG_MEAN: f64 = 3.6;

// recidivism-like: sex x race x label cell counts (5278 usable rows)
const COMPAS_CELLS_POS: [[usize; 2]; 2] = [[197, 225], [662, 754]]; // [F,M] x [Cauc, AA]
const COMPAS_CELLS_NEG: [[usize; 2]; 2] = [[220, 389], [1024, 1807]];
const COMPAS_MU: f64 = 0.85;
const COMPAS_SEX_POS_SHIFT: [f64; 2] = [0.0, 0.55]; // female, male
const COMPAS_RACE_POS_SHIFT: [f64; 2] = [0.0, 0.45]; // caucasian, african-american

fn choose(rng: &mut ChaCha8Rng, table: &[(&str, f64)]) -> String {
    let total: f64 = table.iter().map(|(_, p)| p).sum();
    let mut draw = rng.gen::<f64>() * total;
    for (value, p) in table {
        draw -= p;
        if draw <= 0.0 {
            return value.to_string();
        }
    }
    table.last().unwrap().0.to_string()
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    // Knuth's method; lambdas here stay small
    let l = (-lambda).exp();
    let mut k = 0;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= l || k > 60 {
            return k;
        }
        k += 1;
    }
}

fn clampi(v: f64, lo: i64, hi: i64) -> i64 {
    (v.round() as i64).clamp(lo, hi)
}

struct AdultRow {
    gender: usize,
    race: usize,
    label: i8,
    missing: bool,
}

fn adult_row_csv(rng: &mut ChaCha8Rng, row: &AdultRow) -> String {
    let y = row.label as f64;
    let pos = row.label > 0;
    let z = if pos {
        let mean = MU_POS - GENDER_POS_SHIFT[row.gender] - RACE_POS_SHIFT[row.race];
        Normal::new(mean, SD_POS).unwrap().sample(rng)
    } else if rng.gen::<f64>() < HARD_NEG_FRAC[row.gender] {
        Normal::new(HARD_NEG_MEAN, 0.8).unwrap().sample(rng)
    } else {
        Normal::new(NEG_MEAN[row.gender], 1.0).unwrap().sample(rng)
    };

    let noise = |rng: &mut ChaCha8Rng, sd: f64| Normal::new(0.0, sd).unwrap().sample(rng);
    let age = clampi(37.0 + 3.0 * z + noise(rng, 10.0), 17, 90);
    let education = clampi(9.4 + 1.7 * z + noise(rng, 1.15), 1, 16);
    let hours = clampi(38.0 + 4.5 * z + noise(rng, 7.0), 1, 99);
    let gain_prob = 0.25 / (1.0 + (-1.3 * (z - 2.6)).exp());
    let capital_gain = if rng.gen::<f64>() < gain_prob {
        clampi((8.8 + noise(rng, 0.7)).exp(), 100, 99999)
    } else {
        0
    };

    let mut workclass = choose(
        rng,
        &[
            ("Private", if pos { 0.62 } else { 0.72 }),
            ("Self-emp", if pos { 0.16 } else { 0.08 }),
            ("Local-gov", 0.08),
            ("State-gov", 0.06),
            ("Federal-gov", if pos { 0.08 } else { 0.06 }),
        ],
    );
    let mut occupation = choose(
        rng,
        &[
            ("Exec-managerial", if pos { 0.30 } else { 0.11 }),
            ("Prof-specialty", if pos { 0.26 } else { 0.13 }),
            ("Craft-repair", if pos { 0.12 } else { 0.16 }),
            ("Adm-clerical", if pos { 0.08 } else { 0.15 }),
            ("Sales", if pos { 0.12 } else { 0.12 }),
            ("Other-service", if pos { 0.12 } else { 0.33 }),
        ],
    );
    // near-pure gender marker, the handle fairness training adjusts with
    let relationship = if row.gender == 0 {
        choose(rng, &[("Spouse-F", 0.985), ("Alone", 0.012), ("Shared", 0.003)])
    } else {
        choose(rng, &[("Spouse-M", 0.985), ("Alone", 0.012), ("Shared", 0.003)])
    };
    // race marker with moderate purity
    let mut region_probs = [(ADULT_REGIONS[0], 0.002); 6];
    for (k, region) in ADULT_REGIONS.iter().enumerate() {
        region_probs[k] = (*region, if k == row.race { 0.99 } else { 0.002 });
    }
    let native_region = choose(rng, &region_probs);

    if row.missing {
        if rng.gen_bool(0.5) {
            workclass = "?".to_string();
        } else {
            occupation = "?".to_string();
        }
    }

    let _ = y;
    format!(
        "{age},{workclass},{education},{occupation},{relationship},{native_region},{capital_gain},{hours},{race},{sex},{income}",
        race = ADULT_RACES[row.race],
        sex = if row.gender == 0 { "Female" } else { "Male" },
        income = if pos { ">50K" } else { "<=50K" },
    )
}

const ADULT_REGIONS: [&str; 6] = ["RegionA", "RegionB", "RegionC", "RegionD", "RegionE", "RegionF"];

const ADULT_HEADER: &str = "age,workclass,education_num,occupation,relationship,native_region,capital_gain,hours_per_week,race,sex,income";

fn adult_csv(
    rng: &mut ChaCha8Rng,
    pos_cells: &[[usize; 2]; 5],
    neg_cells: &[[usize; 2]; 5],
    missing_rows: usize,
) -> String {
    let mut rows = Vec::new();
    for race in 0..5 {
        for gender in 0..2 {
            for _ in 0..pos_cells[race][gender] {
                rows.push(AdultRow {
                    gender,
                    race,
                    label: 1,
                    missing: false,
                });
            }
            for _ in 0..neg_cells[race][gender] {
                rows.push(AdultRow {
                    gender,
                    race,
                    label: -1,
                    missing: false,
                });
            }
        }
    }
    for k in 0..missing_rows {
        rows.push(AdultRow {
            gender: k % 2,
            race: 3,
            label: if k % 4 == 0 { 1 } else { -1 },
            missing: true,
        });
    }
    rows.shuffle(rng);
    let mut out = String::from(ADULT_HEADER);
    out.push('\n');
    for row in &rows {
        out.push_str(&adult_row_csv(rng, row));
        out.push('\n');
    }
    out
}

/// Write the census-like train/test pair into `dir`.
pub fn write_adult_like(dir: &Path, seed: u64) -> Result<(PathBuf, PathBuf)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = adult_csv(&mut rng, &ADULT_TRAIN_POS, &ADULT_TRAIN_NEG, ADULT_TRAIN_MISSING);
    let test = adult_csv(&mut rng, &ADULT_TEST_POS, &ADULT_TEST_NEG, ADULT_TEST_MISSING);
    std::fs::create_dir_all(dir)?;
    let train_path = dir.join("adult_train.csv");
    let test_path = dir.join("adult_test.csv");
    std::fs::File::create(&train_path)?.write_all(train.as_bytes())?;
    std::fs::File::create(&test_path)?.write_all(test.as_bytes())?;
    Ok((train_path, test_path))
}

const COMPAS_HEADER: &str = "sex,age,race,juv_fel_count,decile_score,priors_count,days_b_screening_arrest,c_charge_degree,charge_cat,area_cat,score_text,is_recid,two_year_recid";

struct CompasRow {
    sex: usize,  // 0 female, 1 male
    race: usize, // 0 caucasian, 1 african-american
    label: i8,   // +1 = did not recidivate
    violation: Option<usize>,
}

fn compas_row_csv(rng: &mut ChaCha8Rng, row: &CompasRow) -> String {
    let pos = row.label > 0;
    let mean = if pos {
        COMPAS_MU - COMPAS_SEX_POS_SHIFT[row.sex] - COMPAS_RACE_POS_SHIFT[row.race]
    } else {
        -COMPAS_MU
    };
    let z = Normal::new(mean, 1.0).unwrap().sample(rng);

    let noise = |rng: &mut ChaCha8Rng, sd: f64| Normal::new(0.0, sd).unwrap().sample(rng);
    let age = clampi(33.0 - 3.4 * z + noise(rng, 7.5), 18, 75);
    let priors = poisson(rng, (0.45 - 0.75 * z).exp()).min(25);
    let juv = poisson(rng, 0.05 * (-0.3 * z).exp()).min(6);
    let decile = clampi(5.5 - 1.8 * z + noise(rng, 1.5), 1, 10);
    let mut score_text = if decile <= 4 {
        "Low"
    } else if decile <= 7 {
        "Medium"
    } else {
        "High"
    }
    .to_string();

    let mut days = clampi(noise(rng, 9.0), -30, 30);
    let mut charge_degree = choose(
        rng,
        &[("F", if pos { 0.30 } else { 0.42 }), ("M", if pos { 0.70 } else { 0.58 })],
    );
    let charge_cat = if row.sex == 0 {
        choose(rng, &[("CatA", 0.98), ("CatB", 0.01), ("CatC", 0.01)])
    } else {
        choose(rng, &[("CatB", 0.97), ("CatC", 0.02), ("CatA", 0.01)])
    };
    let area_cat = if row.race == 0 {
        choose(rng, &[("AreaA", 0.98), ("AreaB", 0.01), ("AreaC", 0.01)])
    } else {
        choose(rng, &[("AreaB", 0.97), ("AreaC", 0.02), ("AreaA", 0.01)])
    };

    let mut race_name = if row.race == 0 { "Caucasian" } else { "African-American" }.to_string();
    let mut is_recid = if pos { "0" } else { "1" }.to_string();
    match row.violation {
        Some(0) => days = if rng.gen_bool(0.5) { 31 + (rng.gen::<u32>() % 300) as i64 } else { -(31 + (rng.gen::<u32>() % 300) as i64) },
        Some(1) => is_recid = "-1".to_string(),
        Some(2) => charge_degree = "O".to_string(),
        Some(3) => score_text = "N/A".to_string(),
        Some(4) => {
            race_name = choose(rng, &[("Hispanic", 0.6), ("Asian", 0.2), ("Native American", 0.2)])
        }
        _ => {}
    }

    format!(
        "{sex},{age},{race_name},{juv},{decile},{priors},{days},{charge_degree},{charge_cat},{area_cat},{score_text},{is_recid},{label}",
        sex = if row.sex == 0 { "Female" } else { "Male" },
        label = if pos { "0" } else { "1" },
    )
}

/// Write the recidivism-like single file into `dir`.
pub fn write_compas_like(dir: &Path, seed: u64) -> Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for sex in 0..2 {
        for race in 0..2 {
            for _ in 0..COMPAS_CELLS_POS[sex][race] {
                rows.push(CompasRow { sex, race, label: 1, violation: None });
            }
            for _ in 0..COMPAS_CELLS_NEG[sex][race] {
                rows.push(CompasRow { sex, race, label: -1, violation: None });
            }
        }
    }
    // rows the pinned filters must remove: bad screening window, unknown
    // recidivism flag, ordinance charges, missing score, other races
    let violations = [(0usize, 60usize), (1, 25), (2, 15), (3, 10), (4, 85)];
    for (kind, count) in violations {
        for k in 0..count {
            rows.push(CompasRow {
                sex: k % 2,
                race: k % 2,
                label: if k % 3 == 0 { 1 } else { -1 },
                violation: Some(kind),
            });
        }
    }
    rows.shuffle(&mut rng);

    let mut out = String::from(COMPAS_HEADER);
    out.push('\n');
    for row in &rows {
        out.push_str(&compas_row_csv(&mut rng, row));
        out.push('\n');
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join("compas.csv");
    std::fs::File::create(&path)?.write_all(out.as_bytes())?;
    Ok(path)
}
