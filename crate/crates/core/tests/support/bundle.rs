//! Deterministic synthetic model bundle: labeled activations, a head, two
//! shifted sets, a concept manifest, a baseline pool and a pipeline manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use repscope_core::data_model::npy::DType;
use repscope_core::data_model::{save_matrix, Concept, ConceptManifest, Matrix, Sidecar};

pub const DIM: usize = 24;
pub const CLASSES: usize = 6;
pub const SAMPLES: usize = 240;
/// The head has no weight on this coordinate, so activity there never
/// changes a logit.
pub const SILENT_COORD: usize = DIM - 1;

pub struct BundleOptions {
    pub seed: u64,
    /// Scale of an extra spike on `SILENT_COORD`, in units of the noise std.
    pub outlier_scale: Option<f64>,
    pub constant_acts: bool,
}

impl Default for BundleOptions {
    fn default() -> Self {
        BundleOptions { seed: 7, outlier_scale: None, constant_acts: false }
    }
}

fn class_means(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..CLASSES)
        .map(|_| {
            let mut m: Vec<f64> = (0..DIM).map(|_| normal.sample(rng)).collect();
            m[SILENT_COORD] = 0.0;
            let n = m.iter().map(|x| x * x).sum::<f64>().sqrt();
            m.iter().map(|x| 2.0 * x / n).collect()
        })
        .collect()
}

fn draw(
    rng: &mut ChaCha8Rng,
    means: &[Vec<f64>],
    n: usize,
    noise: f64,
    opts: &BundleOptions,
) -> (Matrix, Vec<usize>) {
    let normal = Normal::new(0.0, noise).unwrap();
    let mut data = Vec::with_capacity(n * DIM);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % CLASSES;
        labels.push(y);
        for (j, &mu) in means[y].iter().enumerate() {
            let mut v = mu + normal.sample(rng);
            if j == SILENT_COORD {
                if let Some(s) = opts.outlier_scale {
                    v += s * noise;
                }
            }
            data.push(v);
        }
    }
    if opts.constant_acts {
        data.iter_mut().for_each(|v| *v = 0.5);
    }
    (Matrix::new(n, DIM, data).unwrap(), labels)
}

fn sidecar(labels: &[usize], source: &str) -> Sidecar {
    Sidecar {
        labels: Some(labels.iter().map(|&l| l as i64).collect()),
        layer_name: Some("final".into()),
        source_id: Some(source.into()),
        class_names: None,
        temperature: None,
    }
}

/// Writes the bundle into `dir` and returns the pipeline manifest path.
pub fn write_bundle(dir: &Path, opts: &BundleOptions) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let means = class_means(&mut rng);

    let weight_noise = Normal::new(0.0, 0.05).unwrap();
    let mut head = Matrix::zeros(CLASSES, DIM);
    for k in 0..CLASSES {
        for j in 0..DIM {
            if j != SILENT_COORD {
                head.set(k, j, means[k][j] + weight_noise.sample(&mut rng));
            }
        }
    }
    let head_sidecar = Sidecar {
        class_names: Some((0..CLASSES).map(|k| format!("class_{k}")).collect()),
        ..Sidecar::default()
    };
    save_matrix(&dir.join("head.npy"), &head, DType::F64, &head_sidecar).unwrap();

    let mut data_rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let (acts, labels) = draw(&mut data_rng, &means, SAMPLES, 1.0, opts);
    save_matrix(&dir.join("acts.npy"), &acts, DType::F64, &sidecar(&labels, "in_dist")).unwrap();
    for (s, noise) in [(0usize, 1.4), (1, 1.8)] {
        let (m, l) = draw(&mut data_rng, &means, SAMPLES / 2, noise, opts);
        let name = format!("shift_{s}");
        save_matrix(&dir.join(format!("{name}.npy")), &m, DType::F64, &sidecar(&l, &name)).unwrap();
    }

    // Class concepts follow the class means; feature concepts threshold a
    // single coordinate, and the last one is label noise.
    let mut concepts = Vec::new();
    for k in 0..CLASSES {
        let pos: Vec<usize> = (0..SAMPLES).filter(|&i| labels[i] == k).collect();
        let mut others: Vec<usize> = (0..SAMPLES).filter(|&i| labels[i] != k).collect();
        shuffle(&mut others, &mut rng);
        others.truncate(pos.len());
        others.sort_unstable();
        concepts.push(Concept { id: k as i64, name: format!("class_{k}"), positive_indices: pos, negative_indices: others });
    }
    for (c, j) in [(0usize, 0usize), (1, 5), (2, 11)] {
        let mut order: Vec<usize> = (0..SAMPLES).collect();
        order.sort_by(|&a, &b| acts.get(a, j).total_cmp(&acts.get(b, j)).then(a.cmp(&b)));
        let mut neg = order[..40].to_vec();
        let mut pos = order[SAMPLES - 40..].to_vec();
        pos.sort_unstable();
        neg.sort_unstable();
        concepts.push(Concept { id: 100 + c as i64, name: format!("coord_{j}_high"), positive_indices: pos, negative_indices: neg });
    }
    let mut rows: Vec<usize> = (0..SAMPLES).collect();
    shuffle(&mut rows, &mut rng);
    let (pos, neg) = rows[..60].split_at(30);
    let (mut pos, mut neg) = (pos.to_vec(), neg.to_vec());
    pos.sort_unstable();
    neg.sort_unstable();
    concepts.push(Concept { id: 200, name: "noise".into(), positive_indices: pos, negative_indices: neg });
    ConceptManifest { concepts }.save(&dir.join("concepts.json")).unwrap();

    let mut csv = String::from("model_id,acc_in,acc_shift\n");
    for m in 0..12 {
        let acc_in: f64 = 0.45 + 0.04 * m as f64;
        let y = 0.76 * logit(acc_in) - 1.49 + rng.random_range(-0.05..0.05);
        csv.push_str(&format!("baseline_{m:02},{acc_in:.6},{:.6}\n", inv_logit(y)));
    }
    fs::write(dir.join("baselines.csv"), csv).unwrap();

    let manifest = serde_json::json!({
        "model_id": "synthetic",
        "head": "head.npy",
        "acts": "acts.npy",
        "shift_acts": ["shift_0.npy", "shift_1.npy"],
        "concepts": "concepts.json",
        "baselines": "baselines.csv",
    });
    let path = dir.join("pipeline.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap() + "\n").unwrap();
    path
}

fn shuffle(v: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn inv_logit(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}
