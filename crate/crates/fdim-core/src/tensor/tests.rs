//! Gradient checks for every tape op against central finite differences,
//! plus naive forward oracles for the convolution family.

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gradcheck::{central_diff, relative_error};
use crate::tensor::ops::Conv2dSpec;
use crate::tensor::tape::{Tape, Var};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Split a flat parameter vector into tape leaves with the given shapes,
/// build the graph, reduce the output against fixed weights, and return
/// (scalar value, gradient for every input element).
fn eval_with_grad(
    flat: &[f64],
    shapes: &[&[usize]],
    reduce_seed: u64,
    build: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var,
) -> (f64, Vec<f64>) {
    let mut tape = Tape::<f64>::new();
    let mut vars = Vec::new();
    let mut off = 0;
    for shape in shapes {
        let n: usize = shape.iter().product();
        let arr = ArrayD::from_shape_vec(IxDyn(shape), flat[off..off + n].to_vec()).unwrap();
        vars.push(tape.leaf(arr.into_shared()));
        off += n;
    }
    assert_eq!(off, flat.len());
    let out = build(&mut tape, &vars);

    // Reduce with fixed pseudo-random weights so every output position
    // contributes a distinct gradient signal.
    let out_len = tape.value(out).len();
    let mut r = rng(reduce_seed);
    let w = ArrayD::from_shape_vec(
        IxDyn(tape.shape(out)),
        (0..out_len).map(|_| r.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let wv = tape.constant_owned(w);
    let prod = tape.mul(out, wv);
    let root = tape.sum_all(prod);

    let value = tape.scalar_value(root);
    let grads = tape.backward(root);
    let mut flat_grad = Vec::with_capacity(flat.len());
    for (var, shape) in vars.iter().zip(shapes) {
        let n: usize = shape.iter().product();
        match grads.get(*var) {
            Some(g) => flat_grad.extend(g.iter().copied()),
            None => flat_grad.extend(std::iter::repeat(0.0).take(n)),
        }
    }
    (value, flat_grad)
}

fn check_op(
    shapes: &[&[usize]],
    seed: u64,
    tol: f64,
    build: &dyn Fn(&mut Tape<f64>, &[Var]) -> Var,
) {
    const REDUCE_SALT: u64 = 0xfd1a;
    let total: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let mut r = rng(seed);
    let x0 = rand_vec(total, &mut r);
    let (_, analytic) = eval_with_grad(&x0, shapes, seed ^ REDUCE_SALT, build);
    let numeric = central_diff(
        |x| eval_with_grad(x, shapes, seed ^ REDUCE_SALT, build).0,
        &x0,
        1e-6,
    );
    let err = relative_error(&analytic, &numeric);
    assert!(err < tol, "gradient mismatch: rel err {err:.3e} >= {tol:.0e}");
}

#[test]
fn elementwise_gradients() {
    let s: &[usize] = &[2, 3];
    check_op(&[s, s], 1, 1e-7, &|t, v| t.add(v[0], v[1]));
    check_op(&[s, s], 2, 1e-7, &|t, v| t.sub(v[0], v[1]));
    check_op(&[s, s], 3, 1e-7, &|t, v| t.mul(v[0], v[1]));
    check_op(&[s], 5, 1e-7, &|t, v| t.affine(v[0], 2.5, -0.7));
    check_op(&[s], 6, 1e-7, &|t, v| t.square(v[0]));
    check_op(&[s], 8, 1e-7, &|t, v| t.sigmoid(v[0]));
    check_op(&[s], 9, 1e-7, &|t, v| t.softplus(v[0]));
    check_op(&[s], 10, 1e-7, &|t, v| t.norm_cdf(v[0]));
}

#[test]
fn div_and_sqrt_gradients() {
    // keep denominators and radicands away from zero
    let build_div = |t: &mut Tape<f64>, v: &[Var]| {
        let shifted = t.affine(v[1], 1.0, 3.0);
        t.div(v[0], shifted)
    };
    check_op(&[&[4], &[4]], 11, 1e-7, &build_div);
    let build_sqrt = |t: &mut Tape<f64>, v: &[Var]| {
        let pos = t.affine(v[0], 1.0, 2.0);
        t.sqrt(pos)
    };
    check_op(&[&[5]], 12, 1e-7, &build_sqrt);
}

#[test]
fn relu_gradient_away_from_kink() {
    // shift inputs so |x| > 0.5 and the finite-difference step never
    // crosses the kink
    let build = |t: &mut Tape<f64>, v: &[Var]| {
        let scaled = t.affine(v[0], 0.4, 0.0);
        let shifted = t.affine(scaled, 1.0, 0.6);
        t.relu(shifted)
    };
    check_op(&[&[3, 3]], 13, 1e-7, &build);
}

#[test]
fn broadcast_gradients() {
    let map: &[usize] = &[3, 2, 2];
    let chan: &[usize] = &[3, 1, 1];
    check_op(&[map, chan], 14, 1e-7, &|t, v| t.mul_bcast(v[0], v[1]));
    check_op(&[map, chan], 15, 1e-7, &|t, v| t.add_bcast(v[0], v[1]));
    check_op(&[map, chan], 16, 1e-7, &|t, v| t.sub_bcast(v[0], v[1]));
    // vector gate reshaped to [C,1,1]
    check_op(&[map, &[3]], 17, 1e-7, &|t, v| {
        let g = t.reshape(v[1], &[3, 1, 1]);
        t.mul_bcast(v[0], g)
    });
}

#[test]
fn reduce_gradients() {
    let map: &[usize] = &[3, 4, 2];
    check_op(&[map], 18, 1e-7, &|t, v| t.mean_all(v[0]));
    check_op(&[map], 19, 1e-7, &|t, v| t.sum_all(v[0]));
    check_op(&[map], 20, 1e-7, &|t, v| t.mean_spatial(v[0]));
    check_op(&[map], 21, 1e-6, &|t, v| t.max_spatial(v[0]));
    check_op(&[map], 22, 1e-7, &|t, v| t.mean_channels(v[0]));
    check_op(&[map], 23, 1e-6, &|t, v| t.max_channels(v[0]));
    check_op(&[map], 24, 1e-7, &|t, v| t.reshape(v[0], &[4, 6]));
    check_op(&[&[6]], 25, 1e-7, &|t, v| t.select(v[0], 3));
    check_op(&[&[2, 2, 2], &[3, 2, 2]], 26, 1e-7, &|t, v| {
        t.concat(&[v[0], v[1]], 0)
    });
}

#[test]
fn linear_gradient() {
    check_op(&[&[5], &[3, 5], &[3]], 27, 1e-7, &|t, v| {
        t.linear(v[0], v[1], Some(v[2]))
    });
}

/// Direct nested-loop convolution used as the forward oracle.
fn naive_conv2d(
    x: &ndarray::Array3<f64>,
    w: &ndarray::Array4<f64>,
    b: Option<&ndarray::Array1<f64>>,
    spec: Conv2dSpec,
) -> ndarray::Array3<f64> {
    let (ci, h, wd) = x.dim();
    let (co, ci2, kh, kw) = w.dim();
    assert_eq!(ci, ci2);
    let ho = (h + 2 * spec.padding - kh) / spec.stride + 1;
    let wo = (wd + 2 * spec.padding - kw) / spec.stride + 1;
    let mut y = ndarray::Array3::<f64>::zeros((co, ho, wo));
    for c_out in 0..co {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = b.map_or(0.0, |b| b[c_out]);
                for c_in in 0..ci {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * spec.stride + ky) as isize - spec.padding as isize;
                            let ix = (ox * spec.stride + kx) as isize - spec.padding as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            acc += x[[c_in, iy as usize, ix as usize]]
                                * w[[c_out, c_in, ky, kx]];
                        }
                    }
                }
                y[[c_out, oy, ox]] = acc;
            }
        }
    }
    y
}

#[test]
fn conv2d_matches_naive() {
    let mut r = rng(31);
    for &(stride, padding, h, w) in &[(1usize, 1usize, 5usize, 6usize), (2, 1, 7, 7), (2, 3, 9, 8), (1, 0, 4, 4)] {
        let spec = Conv2dSpec { stride, padding };
        let x = ndarray::Array3::from_shape_vec((3, h, w), rand_vec(3 * h * w, &mut r)).unwrap();
        let wt = ndarray::Array4::from_shape_vec((4, 3, 3, 3), rand_vec(108, &mut r)).unwrap();
        let b = ndarray::Array1::from_vec(rand_vec(4, &mut r));
        let expected = naive_conv2d(&x, &wt, Some(&b), spec);

        let mut tape = Tape::<f64>::new();
        let xv = tape.constant_owned(x.into_dyn());
        let wv = tape.constant_owned(wt.into_dyn());
        let bv = tape.constant_owned(b.into_dyn());
        let y = tape.conv2d(xv, wv, Some(bv), spec);
        let max_diff = (&tape.value(y).to_owned() - &expected.into_dyn())
            .iter()
            .fold(0.0f64, |m, &d| m.max(d.abs()));
        assert!(max_diff < 1e-12, "conv2d vs naive: {max_diff:.3e}");
    }
}

#[test]
fn conv2d_gradients() {
    for &(stride, padding) in &[(1usize, 1usize), (2, 1)] {
        let spec = Conv2dSpec { stride, padding };
        check_op(&[&[2, 5, 5], &[3, 2, 3, 3], &[3]], 33, 1e-6, &|t, v| {
            t.conv2d(v[0], v[1], Some(v[2]), spec)
        });
    }
}

#[test]
fn conv2d_gradients_at_degenerate_1x1_output() {
    // 2x2 input, stride 2: the GEMM collapses to an outer product whose
    // result may come back Fortran-ordered; regression for the layout
    // scramble that produced misplaced weight gradients
    let spec = Conv2dSpec { stride: 2, padding: 1 };
    check_op(&[&[2, 2, 2], &[3, 2, 3, 3], &[3]], 35, 1e-6, &|t, v| {
        t.conv2d(v[0], v[1], Some(v[2]), spec)
    });
    check_op(&[&[2, 2, 2], &[18, 2, 3, 3], &[3, 2, 3, 3]], 36, 1e-6, &|t, v| {
        // offsets derived from a conv so they are non-integer
        let offs = t.conv2d(v[0], v[1], None, spec);
        let offs = t.affine(offs, 0.3, 0.05);
        t.deform_conv2d(v[0], offs, v[2], None, spec)
    });
}

#[test]
fn max_pool_gradient_and_shape() {
    let spec = Conv2dSpec { stride: 2, padding: 1 };
    check_op(&[&[2, 6, 6]], 34, 1e-6, &|t, v| t.max_pool2d(v[0], 3, spec));

    let mut tape = Tape::<f64>::new();
    let x = tape.constant_owned(ArrayD::zeros(IxDyn(&[2, 8, 8])));
    let y = tape.max_pool2d(x, 3, spec);
    assert_eq!(tape.shape(y), &[2, 4, 4]);
}

#[test]
fn deform_conv_zero_offsets_equals_standard() {
    let mut r = rng(40);
    let spec = Conv2dSpec { stride: 1, padding: 1 };
    let x = ndarray::Array3::from_shape_vec((3, 6, 6), rand_vec(108, &mut r)).unwrap();
    let wt = ndarray::Array4::from_shape_vec((4, 3, 3, 3), rand_vec(108, &mut r)).unwrap();
    let b = ndarray::Array1::from_vec(rand_vec(4, &mut r));

    let mut tape = Tape::<f64>::new();
    let xv = tape.constant_owned(x.into_dyn());
    let wv = tape.constant_owned(wt.into_dyn());
    let bv = tape.constant_owned(b.into_dyn());
    let zeros = tape.constant_owned(ArrayD::zeros(IxDyn(&[18, 6, 6])));
    let y_def = tape.deform_conv2d(xv, zeros, wv, Some(bv), spec);
    let y_std = tape.conv2d(xv, wv, Some(bv), spec);
    let diff = (&tape.value(y_def).to_owned() - &tape.value(y_std))
        .iter()
        .fold(0.0f64, |m, &d| m.max(d.abs()));
    assert!(diff < 1e-12, "zero-offset deform vs standard: {diff:.3e}");
}

#[test]
fn deform_conv_constant_field_ignores_offsets() {
    // bilinear samples of a constant field equal that constant wherever the
    // whole 4-corner support is inside the grid; near the border zero
    // padding enters the support, so only the interior is compared
    let spec = Conv2dSpec { stride: 1, padding: 0 };
    let x = ndarray::Array3::from_elem((2, 8, 8), 1.5f64);
    let wt = ndarray::Array4::from_elem((1, 2, 3, 3), 0.25f64);
    let mut r = rng(41);
    let offs =
        ndarray::Array3::from_shape_vec((18, 6, 6), rand_vec(18 * 36, &mut r))
            .unwrap()
            .mapv(|v| v * 0.4);

    let mut tape = Tape::<f64>::new();
    let xv = tape.constant_owned(x.into_dyn());
    let wv = tape.constant_owned(wt.into_dyn());
    let ov = tape.constant_owned(offs.into_dyn());
    let zeros = tape.constant_owned(ArrayD::zeros(IxDyn(&[18, 6, 6])));
    let y_off = tape.deform_conv2d(xv, ov, wv, None, spec);
    let y_zero = tape.deform_conv2d(xv, zeros, wv, None, spec);
    // taps at output (oy,ox) span rows oy-1..oy+3 under |offset| < 1
    let interior = ndarray::s![.., 1..5, 1..5];
    let a = tape.value(y_off).to_owned();
    let b = tape.value(y_zero).to_owned();
    let a3 = a.view().into_dimensionality::<ndarray::Ix3>().unwrap();
    let b3 = b.view().into_dimensionality::<ndarray::Ix3>().unwrap();
    let diff = (&a3.slice(interior).to_owned() - &b3.slice(interior))
        .iter()
        .fold(0.0f64, |m, &d| m.max(d.abs()));
    assert!(diff < 1e-12, "constant field interior: {diff:.3e}");
}

#[test]
fn deform_conv_gradients() {
    let spec = Conv2dSpec { stride: 1, padding: 1 };
    // offsets scaled to generic (non-integer) sampling positions
    let build = |t: &mut Tape<f64>, v: &[Var]| {
        let offs = t.affine(v[1], 0.7, 0.13);
        t.deform_conv2d(v[0], offs, v[2], Some(v[3]), spec)
    };
    check_op(
        &[&[2, 5, 5], &[18, 5, 5], &[3, 2, 3, 3], &[3]],
        42,
        1e-6,
        &build,
    );
}

#[test]
fn backward_accumulates_through_shared_nodes() {
    // f(x) = sum(x*x + x) both reuse the same leaf
    let mut tape = Tape::<f64>::new();
    let arr = ArrayD::from_shape_vec(IxDyn(&[3]), vec![1.0, 2.0, 3.0]).unwrap();
    let x = tape.leaf(arr.into_shared());
    let sq = tape.mul(x, x);
    let sum = tape.add(sq, x);
    let root = tape.sum_all(sum);
    let grads = tape.backward(root);
    let g = grads.get(x).unwrap();
    // d/dx (x^2 + x) = 2x + 1
    assert_eq!(g.as_slice().unwrap(), &[3.0, 5.0, 7.0]);
}

#[test]
fn constants_get_no_gradient() {
    let mut tape = Tape::<f64>::new();
    let arr = ArrayD::from_shape_vec(IxDyn(&[2]), vec![1.0, 2.0]).unwrap();
    let x = tape.leaf(arr.clone().into_shared());
    let c = tape.constant(arr.into_shared());
    let prod = tape.mul(x, c);
    let root = tape.sum_all(prod);
    let grads = tape.backward(root);
    assert!(grads.get(x).is_some());
    assert!(grads.get(c).is_none());
}
