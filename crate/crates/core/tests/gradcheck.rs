//! Central finite differences against the tape's reverse-mode gradients.

use rand::Rng;
use xai_core::autodiff::{GradTape, Var};
use xai_core::blackbox::{CaeClassifier, CaeConfig, ConvStage};
use xai_core::data::{Matrix, ScalerParams};
use xai_core::layers;
use xai_core::rng::{normal, seeded, SeededRng};
use xai_core::tensor::Tensor;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;
const SEEDS: u64 = 10;

fn randn(rng: &mut SeededRng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| normal(rng)).collect()).unwrap()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Builds `out = f(inputs)` and reduces it to `sum(out * r)` for a fixed
/// random `r`, so every output coordinate is exercised.
fn project(tape: &mut GradTape, out: Var, r: &Tensor) -> Var {
    let rv = tape.leaf(r.clone());
    let prod = tape.mul(out, rv).unwrap();
    tape.sum(prod)
}

fn max_error<F>(inputs: &[Tensor], rng: &mut SeededRng, f: F) -> f64
where
    F: Fn(&mut GradTape, &[Var]) -> Var,
{
    let mut tape = GradTape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let r = randn(rng, &tape.value(out).shape);
    let loss = project(&mut tape, out, &r);
    let grads = tape.backward(loss).unwrap();

    let eval = |perturbed: &[Tensor]| {
        let mut t = GradTape::new();
        let vs: Vec<Var> = perturbed.iter().map(|x| t.leaf(x.clone())).collect();
        let o = f(&mut t, &vs);
        let l = project(&mut t, o, &r);
        t.scalar(l)
    };
    let mut worst: f64 = 0.0;
    for (i, var) in vars.iter().enumerate() {
        let g = grads.wrt(*var);
        for e in 0..inputs[i].len() {
            let mut plus = inputs.to_vec();
            plus[i].values[e] += STEP;
            let mut minus = inputs.to_vec();
            minus[i].values[e] -= STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
            worst = worst.max(rel_err(g.values[e], numeric));
        }
    }
    worst
}

fn run_cases(name: &str, cases: &[Box<dyn Fn(&mut SeededRng) -> f64>]) {
    assert!(cases.len() >= 3, "{name}: need at least three shapes");
    for seed in 0..SEEDS {
        for (c, case) in cases.iter().enumerate() {
            let mut rng = seeded(1000 * seed + c as u64);
            let err = case(&mut rng);
            assert!(err <= TOL, "{name} shape {c} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn conv1d_gradients() {
    let shapes = [(1, 1, 5, 2, 3, 1, 1), (2, 2, 7, 3, 3, 2, 1), (3, 1, 8, 2, 5, 1, 2)];
    let cases: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = shapes
        .iter()
        .map(|&(b, ci, l, co, w, s, p)| {
            Box::new(move |rng: &mut SeededRng| {
                let inputs = [randn(rng, &[b, ci, l]), randn(rng, &[co, ci, w]), randn(rng, &[co])];
                max_error(&inputs, rng, |t, v| t.conv1d(v[0], v[1], v[2], s, p).unwrap())
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("conv1d", &cases);
}

#[test]
fn transposed_conv1d_gradients() {
    // (batch, c_out, len_in, c_in, width, stride, padding)
    let shapes = [(1, 2, 4, 1, 3, 1, 1), (2, 3, 5, 2, 3, 2, 1), (2, 1, 6, 3, 5, 1, 2)];
    let cases: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = shapes
        .iter()
        .map(|&(b, co, l, ci, w, s, p)| {
            Box::new(move |rng: &mut SeededRng| {
                let inputs = [randn(rng, &[b, co, l]), randn(rng, &[co, ci, w]), randn(rng, &[ci])];
                max_error(&inputs, rng, |t, v| t.transposed_conv1d(v[0], v[1], v[2], s, p).unwrap())
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("transposed_conv1d", &cases);
}

#[test]
fn maxpool_and_unpool_gradients() {
    let shapes = [(1, 1, 6, 2), (2, 3, 7, 3), (1, 2, 8, 4)];
    let pool: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = shapes
        .iter()
        .map(|&(b, c, l, w)| {
            Box::new(move |rng: &mut SeededRng| {
                let inputs = [randn(rng, &[b, c, l])];
                max_error(&inputs, rng, |t, v| t.maxpool(v[0], w))
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("maxpool", &pool);
    let unpool: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = shapes
        .iter()
        .map(|&(b, c, l, w)| {
            Box::new(move |rng: &mut SeededRng| {
                let (pooled, sw) = layers::maxpool(&randn(rng, &[b, c, l]), w);
                let inputs = [randn(rng, &pooled.shape)];
                max_error(&inputs, rng, |t, v| t.unpool(v[0], sw.clone()).unwrap())
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("unpool", &unpool);
}

fn unary_cases(op: fn(&mut GradTape, Var) -> Var) -> Vec<Box<dyn Fn(&mut SeededRng) -> f64>> {
    let shapes: [&[usize]; 3] = [&[4], &[2, 3], &[2, 2, 5]];
    shapes
        .iter()
        .map(|&shape| {
            let shape = shape.to_vec();
            Box::new(move |rng: &mut SeededRng| {
                let inputs = [randn(rng, &shape)];
                max_error(&inputs, rng, |t, v| op(t, v[0]))
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect()
}

#[test]
fn activation_gradients() {
    run_cases("elu", &unary_cases(|t, v| t.elu(v)));
    run_cases("sigmoid", &unary_cases(|t, v| t.sigmoid(v)));
    run_cases("scale", &unary_cases(|t, v| t.scale(v, -1.7)));
    run_cases("sum", &unary_cases(|t, v| t.sum(v)));
    run_cases("sum_squares", &unary_cases(|t, v| t.sum_squares(v)));
    run_cases("softmax_rows", &unary_cases(|t, v| t.softmax_rows(v)));
}

#[test]
fn reshape_gradients() {
    let shapes: [(&[usize], &[usize]); 3] = [(&[6], &[2, 3]), (&[2, 6], &[3, 4]), (&[2, 2, 3], &[12])];
    let cases: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = shapes
        .iter()
        .map(|&(from, to)| {
            let (from, to) = (from.to_vec(), to.to_vec());
            Box::new(move |rng: &mut SeededRng| {
                let inputs = [randn(rng, &from)];
                max_error(&inputs, rng, |t, v| t.reshape(v[0], &to).unwrap())
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("reshape", &cases);
}

#[test]
fn binary_and_dense_gradients() {
    let shapes: [&[usize]; 3] = [&[3], &[2, 4], &[2, 3, 2]];
    for (name, op) in [
        ("mul", (|t: &mut GradTape, a, b| t.mul(a, b).unwrap()) as fn(&mut GradTape, Var, Var) -> Var),
        ("add", |t: &mut GradTape, a, b| t.add(a, b).unwrap()),
    ] {
        let cases: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = shapes
            .iter()
            .map(|&shape| {
                let shape = shape.to_vec();
                Box::new(move |rng: &mut SeededRng| {
                    let inputs = [randn(rng, &shape), randn(rng, &shape)];
                    max_error(&inputs, rng, |t, v| op(t, v[0], v[1]))
                }) as Box<dyn Fn(&mut SeededRng) -> f64>
            })
            .collect();
        run_cases(name, &cases);
    }
    let dense: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = [(1, 3, 2), (4, 2, 5), (3, 6, 3)]
        .iter()
        .map(|&(b, d, o)| {
            Box::new(move |rng: &mut SeededRng| {
                let inputs = [randn(rng, &[b, d]), randn(rng, &[o, d]), randn(rng, &[o])];
                max_error(&inputs, rng, |t, v| t.dense(v[0], v[1], v[2]).unwrap())
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("dense", &dense);
}

#[test]
fn loss_gradients() {
    let mse: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = [vec![4], vec![2, 3], vec![3, 1, 4]]
        .into_iter()
        .map(|shape| {
            Box::new(move |rng: &mut SeededRng| {
                let target = randn(rng, &shape).values;
                let inputs = [randn(rng, &shape)];
                max_error(&inputs, rng, |t, v| t.mse(v[0], &target).unwrap())
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("mse", &mse);
    let ce: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = [(1, 2), (4, 3), (5, 7)]
        .iter()
        .map(|&(b, c)| {
            Box::new(move |rng: &mut SeededRng| {
                let labels: Vec<usize> = (0..b).map(|_| rng.gen_range(0..c)).collect();
                let inputs = [randn(rng, &[b, c])];
                max_error(&inputs, rng, |t, v| t.softmax_cross_entropy(v[0], &labels).unwrap())
            }) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("softmax_cross_entropy", &ce);
}

fn joint_loss_error(config: &CaeConfig, m: usize, c: usize, batch: usize, rng: &mut SeededRng) -> f64 {
    let scaler = ScalerParams {
        means: vec![0.0; m],
        std_devs: vec![1.0; m],
    };
    let x = Matrix::new(batch, m, randn(rng, &[batch * m]).values).unwrap();
    let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..c)).collect();
    let (lo, hi) = xai_core::blackbox::column_ranges(&x);
    let mut model = CaeClassifier::init(config, m, c, scaler, lo, hi).unwrap();
    // nonzero biases so every path is exercised
    let names: Vec<String> = model.params.keys().cloned().collect();
    for n in &names {
        if n.ends_with(".b") {
            let len = model.param(n).len();
            model.param_mut(n).values = (0..len).map(|_| 0.1 * normal(rng)).collect();
        }
    }
    let (_, grads) = model.joint_loss_grad(&x, &labels).unwrap();
    let mut worst: f64 = 0.0;
    for n in &names {
        for e in 0..model.param(n).len() {
            let orig = model.param(n).values[e];
            model.param_mut(n).values[e] = orig + STEP;
            let up = model.joint_loss(&x, &labels).unwrap().total;
            model.param_mut(n).values[e] = orig - STEP;
            let down = model.joint_loss(&x, &labels).unwrap().total;
            model.param_mut(n).values[e] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(rel_err(grads[n].values[e], numeric));
        }
    }
    worst
}

#[test]
fn joint_loss_gradients() {
    let stage = |channels, width, stride| ConvStage { channels, width, stride };
    let configs = [
        (
            CaeConfig {
                stages: vec![stage(2, 3, 1)],
                pool: 2,
                embedding_dim: 3,
                lambda: 1e-2,
                ..CaeConfig::default()
            },
            12,
            3,
            4,
        ),
        (
            CaeConfig {
                stages: vec![stage(2, 4, 2)],
                pool: 2,
                embedding_dim: 2,
                alpha_r: 0.3,
                alpha_ce: 0.7,
                lambda: 0.1,
                ..CaeConfig::default()
            },
            12,
            2,
            3,
        ),
        (
            CaeConfig {
                stages: vec![stage(3, 3, 1), stage(2, 3, 1)],
                pool: 2,
                embedding_dim: 4,
                ..CaeConfig::default()
            },
            10,
            4,
            5,
        ),
    ];
    let cases: Vec<Box<dyn Fn(&mut SeededRng) -> f64>> = configs
        .iter()
        .map(|(cfg, m, c, b)| {
            let cfg = cfg.clone();
            let (m, c, b) = (*m, *c, *b);
            Box::new(move |rng: &mut SeededRng| joint_loss_error(&cfg, m, c, b, rng)) as Box<dyn Fn(&mut SeededRng) -> f64>
        })
        .collect();
    run_cases("joint loss", &cases);
}
