//! Deformable 2-D convolution (v1 semantics: learned offsets, no modulation
//! masks). Kernel sampling positions are displaced per output location by an
//! offset field and read with bilinear interpolation; positions outside the
//! grid contribute zero.
//!
//! Offset layout matches the common convention: channel 2k carries the y
//! displacement and channel 2k+1 the x displacement for kernel tap
//! k = ky*kw + kx, giving [2*kh*kw, Ho, Wo].

use ndarray::{Array2, Array3, ArrayD, ArrayViewD, Ix1, Ix3, Ix4};

use crate::tensor::scalar::Scalar;
use crate::tensor::tape::{BackwardOp, ParentGrads, Tape, Var};

use super::conv::{conv_out_dim, Conv2dSpec};

/// Sampling geometry for one (kernel tap, output position) pair.
struct TapSample<T> {
    y0: isize,
    x0: isize,
    dy: T,
    dx: T,
}

fn sample_grid<T: Scalar>(
    offsets: &ndarray::ArrayView3<'_, T>,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    spec: Conv2dSpec,
) -> Vec<TapSample<T>> {
    let k2 = kh * kw;
    let os = offsets.as_slice().expect("offsets must be contiguous");
    let hw = ho * wo;
    let (s, p) = (spec.stride as isize, spec.padding as isize);
    let mut grid = Vec::with_capacity(k2 * hw);
    for k in 0..k2 {
        let (ky, kx) = (k / kw, k % kw);
        for oy in 0..ho {
            for ox in 0..wo {
                let o = oy * wo + ox;
                let py = T::from_f64((oy as isize * s - p + ky as isize) as f64)
                    + os[2 * k * hw + o];
                let px = T::from_f64((ox as isize * s - p + kx as isize) as f64)
                    + os[(2 * k + 1) * hw + o];
                let fy = py.floor();
                let fx = px.floor();
                grid.push(TapSample {
                    y0: fy.as_f64() as isize,
                    x0: fx.as_f64() as isize,
                    dy: py - fy,
                    dx: px - fx,
                });
            }
        }
    }
    grid
}

#[inline]
fn corner<T: Scalar>(xs: &[T], base: usize, h: usize, w: usize, y: isize, x: isize) -> T {
    if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
        T::zero()
    } else {
        xs[base + y as usize * w + x as usize]
    }
}

/// Bilinearly sampled im2col: [Cin*kh*kw, Ho*Wo].
fn deform_cols<T: Scalar>(
    x: &ndarray::ArrayView3<'_, T>,
    grid: &[TapSample<T>],
    k2: usize,
    hw: usize,
) -> Array2<T> {
    let (c, h, w) = x.dim();
    let xs = x.as_slice().expect("input must be contiguous");
    let mut cols = Array2::<T>::zeros((c * k2, hw));
    let cs = cols.as_slice_mut().unwrap();
    let one = T::one();
    for ci in 0..c {
        let base = ci * h * w;
        for k in 0..k2 {
            let row_base = (ci * k2 + k) * hw;
            for o in 0..hw {
                let t = &grid[k * hw + o];
                let (w00, w01) = ((one - t.dy) * (one - t.dx), (one - t.dy) * t.dx);
                let (w10, w11) = (t.dy * (one - t.dx), t.dy * t.dx);
                let v = w00 * corner(xs, base, h, w, t.y0, t.x0)
                    + w01 * corner(xs, base, h, w, t.y0, t.x0 + 1)
                    + w10 * corner(xs, base, h, w, t.y0 + 1, t.x0)
                    + w11 * corner(xs, base, h, w, t.y0 + 1, t.x0 + 1);
                cs[row_base + o] = v;
            }
        }
    }
    cols
}

struct DeformConv2dOp {
    spec: Conv2dSpec,
    has_bias: bool,
}

impl<T: Scalar> BackwardOp<T> for DeformConv2dOp {
    fn backward(
        &self,
        g: &ArrayD<T>,
        inputs: &[ArrayViewD<'_, T>],
        _out: &ArrayViewD<'_, T>,
        needs: &[bool],
    ) -> ParentGrads<T> {
        let x = inputs[0].view().into_dimensionality::<Ix3>().unwrap();
        let offs = inputs[1].view().into_dimensionality::<Ix3>().unwrap();
        let wt = inputs[2].view().into_dimensionality::<Ix4>().unwrap();
        let (co, ci, kh, kw) = wt.dim();
        let (_, h, w) = x.dim();
        let g3 = g.view().into_dimensionality::<Ix3>().unwrap();
        let (_, ho, wo) = g3.dim();
        let (k2, hw) = (kh * kw, ho * wo);

        let grid = sample_grid(&offs, kh, kw, ho, wo, self.spec);
        let g2 = g3.to_owned().into_shape((co, hw)).unwrap();
        let w2 = wt.to_owned().into_shape((co, ci * k2)).unwrap();

        let dw = needs[2].then(|| {
            let cols = deform_cols(&x, &grid, k2, hw);
            super::standardize2(g2.dot(&cols.t()))
                .into_shape((co, ci, kh, kw))
                .unwrap()
                .into_dyn()
        });

        let need_x = needs[0];
        let need_off = needs[1];
        let (mut dx_arr, mut doff_arr) = (None, None);
        if need_x || need_off {
            // dcols routes the output gradient back through the GEMM
            let dcols = super::standardize2(w2.t().dot(&g2)); // [Cin*K2, HoWo]
            let dcs = dcols.as_slice().unwrap();
            let xs = x.as_slice().unwrap();
            let one = T::one();

            let mut dx = Array3::<T>::zeros((ci, h, w));
            let dxs = dx.as_slice_mut().unwrap();
            let mut doff = Array3::<T>::zeros((2 * k2, ho, wo));
            let dos = doff.as_slice_mut().unwrap();

            for cii in 0..ci {
                let base = cii * h * w;
                for k in 0..k2 {
                    let row_base = (cii * k2 + k) * hw;
                    for o in 0..hw {
                        let gc = dcs[row_base + o];
                        if gc == T::zero() {
                            continue;
                        }
                        let t = &grid[k * hw + o];
                        let (y0, x0, dy, dx_f) = (t.y0, t.x0, t.dy, t.dx);
                        if need_x {
                            let mut scatter = |y: isize, xp: isize, wgt: T| {
                                if y >= 0 && xp >= 0 && y < h as isize && xp < w as isize {
                                    let idx = base + y as usize * w + xp as usize;
                                    dxs[idx] = dxs[idx] + gc * wgt;
                                }
                            };
                            scatter(y0, x0, (one - dy) * (one - dx_f));
                            scatter(y0, x0 + 1, (one - dy) * dx_f);
                            scatter(y0 + 1, x0, dy * (one - dx_f));
                            scatter(y0 + 1, x0 + 1, dy * dx_f);
                        }
                        if need_off {
                            let v00 = corner(xs, base, h, w, y0, x0);
                            let v01 = corner(xs, base, h, w, y0, x0 + 1);
                            let v10 = corner(xs, base, h, w, y0 + 1, x0);
                            let v11 = corner(xs, base, h, w, y0 + 1, x0 + 1);
                            let dsdy =
                                (one - dx_f) * (v10 - v00) + dx_f * (v11 - v01);
                            let dsdx =
                                (one - dy) * (v01 - v00) + dy * (v11 - v10);
                            dos[2 * k * hw + o] = dos[2 * k * hw + o] + gc * dsdy;
                            dos[(2 * k + 1) * hw + o] = dos[(2 * k + 1) * hw + o] + gc * dsdx;
                        }
                    }
                }
            }
            dx_arr = need_x.then(|| dx.into_dyn());
            doff_arr = need_off.then(|| doff.into_dyn());
        }

        let mut grads = vec![dx_arr, doff_arr, dw];
        if self.has_bias {
            grads.push(needs[3].then(|| {
                let mut db = ndarray::Array1::<T>::zeros(co);
                for c in 0..co {
                    db[c] = g3.index_axis(ndarray::Axis(0), c).sum();
                }
                db.into_dyn()
            }));
        }
        grads
    }
}

impl<T: Scalar> Tape<T> {
    /// Deformable convolution. x [Cin, H, W], offsets [2*kh*kw, Ho, Wo],
    /// w [Cout, Cin, kh, kw], b [Cout].
    pub fn deform_conv2d(
        &mut self,
        x: Var,
        offsets: Var,
        w: Var,
        b: Option<Var>,
        spec: Conv2dSpec,
    ) -> Var {
        let xv = self.value_shared(x);
        let x3 = xv.view().into_dimensionality::<Ix3>().expect("deform_conv2d: x must be [C,H,W]");
        let wv = self.value_shared(w);
        let w4 = wv.view().into_dimensionality::<Ix4>().expect("deform_conv2d: w must be 4-D");
        let (co, ci, kh, kw) = w4.dim();
        let (xc, h, wd) = x3.dim();
        assert_eq!(ci, xc, "deform_conv2d: in-channel mismatch");
        let ho = conv_out_dim(h, kh, spec);
        let wo = conv_out_dim(wd, kw, spec);
        let ov = self.value_shared(offsets);
        let o3 = ov.view().into_dimensionality::<Ix3>().expect("deform_conv2d: offsets must be 3-D");
        assert_eq!(
            o3.dim(),
            (2 * kh * kw, ho, wo),
            "deform_conv2d: offset field shape mismatch"
        );

        let grid = sample_grid(&o3, kh, kw, ho, wo, spec);
        let cols = deform_cols(&x3, &grid, kh * kw, ho * wo);
        let w2 = w4.to_owned().into_shape((co, ci * kh * kw)).unwrap();
        let mut y = w2.dot(&cols);
        if let Some(b) = b {
            let bv = self.value(b).into_dimensionality::<Ix1>().expect("deform_conv2d: b must be 1-D").to_owned();
            for (mut row, &bias) in y.outer_iter_mut().zip(bv.iter()) {
                row.mapv_inplace(|v| v + bias);
            }
        }
        let y = super::standardize2(y).into_shape((co, ho, wo)).unwrap().into_dyn();

        let mut parents = vec![x, offsets, w];
        if let Some(b) = b {
            parents.push(b);
        }
        self.push_op(
            y,
            parents,
            Box::new(DeformConv2dOp {
                spec,
                has_bias: b.is_some(),
            }),
        )
    }
}
