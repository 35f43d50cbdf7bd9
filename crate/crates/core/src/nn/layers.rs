use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use serde::{Deserialize, Serialize};

use super::{glorot_bound, uniform, Params, Real};
use crate::seed::Rng;

/// Dense layer `y = x·W + b` over a batch of row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// (in, out)
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(input: usize, output: usize) -> Linear<T> {
        Linear {
            w: Array2::zeros((input, output)),
            b: Array1::zeros(output),
        }
    }

    pub fn glorot(input: usize, output: usize, rng: &mut Rng) -> Linear<T> {
        let bound = glorot_bound(input, output);
        Linear {
            w: Array2::from_shape_simple_fn((input, output), || uniform(rng, bound)),
            b: Array1::zeros(output),
        }
    }

    pub fn input(&self) -> usize {
        self.w.nrows()
    }

    pub fn output(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        x.dot(&self.w) + &self.b
    }

    /// Accumulates into `grad` and returns `dL/dx` when asked.
    pub fn backward(
        &self,
        x: ArrayView2<'_, T>,
        dy: ArrayView2<'_, T>,
        grad: &mut Linear<T>,
        want_dx: bool,
    ) -> Option<Array2<T>> {
        grad.w += &x.t().dot(&dy);
        grad.b += &dy.sum_axis(Axis(0));
        want_dx.then(|| dy.dot(&self.w.t()))
    }
}

impl<T: Real> Params<T> for Linear<T> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, T>> {
        vec![self.w.view().into_dyn(), self.b.view().into_dyn()]
    }
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        vec![self.w.view_mut().into_dyn(), self.b.view_mut().into_dyn()]
    }
    fn names(&self) -> Vec<String> {
        vec!["w".into(), "b".into()]
    }
}

pub fn relu<T: Real>(x: &Array2<T>) -> Array2<T> {
    x.mapv(|v| v.max(T::zero()))
}

pub fn relu_backward<T: Real>(pre: &Array2<T>, dy: Array2<T>) -> Array2<T> {
    let mut d = dy;
    ndarray::Zip::from(&mut d).and(pre).for_each(|d, &p| {
        if p <= T::zero() {
            *d = T::zero();
        }
    });
    d
}

/// Valid (unpadded, stride 1) convolution geometry over `channels × height × width` images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub filters: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        self.height + 1 - self.kh
    }
    pub fn out_w(&self) -> usize {
        self.width + 1 - self.kw
    }
    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }
    pub fn patch(&self) -> usize {
        self.channels * self.kh * self.kw
    }
    pub fn image(&self) -> usize {
        self.channels * self.height * self.width
    }
    /// Flattened feature map, ordered position-major then filter.
    pub fn features(&self) -> usize {
        self.positions() * self.filters
    }

    pub fn check(&self) -> crate::Result<()> {
        if self.kh == 0
            || self.kw == 0
            || self.kh > self.height
            || self.kw > self.width
            || self.channels == 0
            || self.filters == 0
        {
            return Err(crate::Error::Config(format!("invalid convolution geometry {self:?}")));
        }
        Ok(())
    }

    /// (batch, image) → (batch·positions, patch)
    pub fn im2col<T: Real>(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let (oh, ow, p, patch) = (self.out_h(), self.out_w(), self.positions(), self.patch());
        let x = x.as_standard_layout();
        let mut cols = Array2::zeros((x.nrows() * p, patch));
        let out = cols.as_slice_mut().expect("fresh array");
        for (b, img) in x.outer_iter().enumerate() {
            let img = img.to_slice().expect("standard layout");
            for oi in 0..oh {
                for oj in 0..ow {
                    let row = &mut out[(b * p + oi * ow + oj) * patch..][..patch];
                    let mut c = 0;
                    for ch in 0..self.channels {
                        let base = ch * self.height * self.width;
                        for ki in 0..self.kh {
                            let at = base + (oi + ki) * self.width + oj;
                            row[c..c + self.kw].copy_from_slice(&img[at..at + self.kw]);
                            c += self.kw;
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`ConvGeom::im2col`]: scatter-adds patches back into images.
    pub fn col2im<T: Real>(&self, cols: ArrayView2<'_, T>, batch: usize) -> Array2<T> {
        let (oh, ow, p, patch) = (self.out_h(), self.out_w(), self.positions(), self.patch());
        let cols = cols.as_standard_layout();
        let src = cols.as_slice().expect("standard layout");
        let mut x = Array2::zeros((batch, self.image()));
        for (b, mut img) in x.outer_iter_mut().enumerate() {
            let img = img.as_slice_mut().expect("fresh array");
            for oi in 0..oh {
                for oj in 0..ow {
                    let row = &src[(b * p + oi * ow + oj) * patch..][..patch];
                    let mut c = 0;
                    for ch in 0..self.channels {
                        let base = ch * self.height * self.width;
                        for ki in 0..self.kh {
                            let at = base + (oi + ki) * self.width + oj;
                            for (d, s) in img[at..at + self.kw].iter_mut().zip(&row[c..c + self.kw]) {
                                *d += *s;
                            }
                            c += self.kw;
                        }
                    }
                }
            }
        }
        x
    }

    fn glorot_kernel<T: Real>(&self, rng: &mut Rng) -> Array2<T> {
        let bound = glorot_bound(self.patch(), self.filters * self.kh * self.kw);
        Array2::from_shape_simple_fn((self.patch(), self.filters), || uniform(rng, bound))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub geom: ConvGeom,
    /// (patch, filters)
    pub k: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(geom: ConvGeom) -> Conv2d<T> {
        Conv2d {
            geom,
            k: Array2::zeros((geom.patch(), geom.filters)),
            b: Array1::zeros(geom.filters),
        }
    }

    pub fn glorot(geom: ConvGeom, rng: &mut Rng) -> Conv2d<T> {
        Conv2d {
            geom,
            k: geom.glorot_kernel(rng),
            b: Array1::zeros(geom.filters),
        }
    }

    /// Returns the patch matrix (kept for the backward pass) and the (batch, features) output.
    pub fn forward(&self, x: ArrayView2<'_, T>) -> (Array2<T>, Array2<T>) {
        let cols = self.geom.im2col(x);
        let out = cols.dot(&self.k) + &self.b;
        let out = out
            .into_shape_with_order((x.nrows(), self.geom.features()))
            .expect("contiguous");
        (cols, out)
    }

    pub fn backward(
        &self,
        cols: &Array2<T>,
        dout: ArrayView2<'_, T>,
        grad: &mut Conv2d<T>,
        want_dx: bool,
    ) -> Option<Array2<T>> {
        let batch = dout.nrows();
        let d = dout
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch * self.geom.positions(), self.geom.filters))
            .expect("contiguous");
        grad.k += &cols.t().dot(&d);
        grad.b += &d.sum_axis(Axis(0));
        want_dx.then(|| self.geom.col2im(d.dot(&self.k.t()).view(), batch))
    }
}

impl<T: Real> Params<T> for Conv2d<T> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, T>> {
        vec![self.k.view().into_dyn(), self.b.view().into_dyn()]
    }
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        vec![self.k.view_mut().into_dyn(), self.b.view_mut().into_dyn()]
    }
    fn names(&self) -> Vec<String> {
        vec!["k".into(), "b".into()]
    }
}

/// Transposed convolution mapping a `geom` feature map back to a `geom` image: the adjoint
/// of [`Conv2d`] with its own kernel, plus one bias per image channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d<T> {
    pub geom: ConvGeom,
    /// (patch, filters)
    pub k: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> ConvTranspose2d<T> {
    pub fn zeros(geom: ConvGeom) -> ConvTranspose2d<T> {
        ConvTranspose2d {
            geom,
            k: Array2::zeros((geom.patch(), geom.filters)),
            b: Array1::zeros(geom.channels),
        }
    }

    pub fn glorot(geom: ConvGeom, rng: &mut Rng) -> ConvTranspose2d<T> {
        ConvTranspose2d {
            geom,
            k: geom.glorot_kernel(rng),
            b: Array1::zeros(geom.channels),
        }
    }

    fn rows(&self, y: ArrayView2<'_, T>) -> Array2<T> {
        y.as_standard_layout()
            .into_owned()
            .into_shape_with_order((y.nrows() * self.geom.positions(), self.geom.filters))
            .expect("contiguous")
    }

    /// (batch, features) → (batch, image)
    pub fn forward(&self, y: ArrayView2<'_, T>) -> Array2<T> {
        let cols = self.rows(y).dot(&self.k.t());
        let mut out = self.geom.col2im(cols.view(), y.nrows());
        let plane = self.geom.height * self.geom.width;
        for mut img in out.outer_iter_mut() {
            for (ch, b) in self.b.iter().enumerate() {
                img.slice_mut(ndarray::s![ch * plane..(ch + 1) * plane])
                    .mapv_inplace(|v| v + *b);
            }
        }
        out
    }

    pub fn backward(
        &self,
        y: ArrayView2<'_, T>,
        dout: ArrayView2<'_, T>,
        grad: &mut ConvTranspose2d<T>,
        want_dy: bool,
    ) -> Option<Array2<T>> {
        let dcols = self.geom.im2col(dout);
        grad.k += &dcols.t().dot(&self.rows(y));
        let plane = self.geom.height * self.geom.width;
        for img in dout.outer_iter() {
            for ch in 0..self.geom.channels {
                grad.b[ch] += img.slice(ndarray::s![ch * plane..(ch + 1) * plane]).sum();
            }
        }
        want_dy.then(|| {
            dcols
                .dot(&self.k)
                .into_shape_with_order((y.nrows(), self.geom.features()))
                .expect("contiguous")
        })
    }
}

impl<T: Real> Params<T> for ConvTranspose2d<T> {
    fn tensors(&self) -> Vec<ArrayViewD<'_, T>> {
        vec![self.k.view().into_dyn(), self.b.view().into_dyn()]
    }
    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        vec![self.k.view_mut().into_dyn(), self.b.view_mut().into_dyn()]
    }
    fn names(&self) -> Vec<String> {
        vec!["k".into(), "b".into()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::arr2;
    use proptest::prelude::*;

    fn geom() -> ConvGeom {
        ConvGeom {
            channels: 2,
            height: 6,
            width: 5,
            kh: 3,
            kw: 2,
            filters: 3,
        }
    }

    #[test]
    fn default_geometry_gives_an_18_by_10_map() {
        let g = ConvGeom {
            channels: 1,
            height: 32,
            width: 24,
            kh: 15,
            kw: 15,
            filters: 8,
        };
        assert_eq!((g.out_h(), g.out_w()), (18, 10));
        assert_eq!(g.features(), 1440);
    }

    #[test]
    fn linear_chain_by_hand() {
        let l = Linear {
            w: arr2(&[[1.0f64, 0.0, 2.0], [0.0, 1.0, 0.0], [1.0, 1.0, 1.0]]),
            b: ndarray::arr1(&[0.5, -1.0, 0.0]),
        };
        let y = l.forward(arr2(&[[1.0, 2.0, 3.0]]).view());
        assert_eq!(y, arr2(&[[4.5, 4.0, 5.0]]));
    }

    #[test]
    fn single_filter_convolution_by_hand() {
        let g = ConvGeom {
            channels: 1,
            height: 3,
            width: 3,
            kh: 2,
            kw: 2,
            filters: 1,
        };
        let mut c = Conv2d::<f64>::zeros(g);
        c.k.assign(&arr2(&[[1.0], [0.0], [0.0], [-1.0]]));
        let x = arr2(&[[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]]);
        let (_, y) = c.forward(x.view());
        assert_eq!(y, arr2(&[[-4.0, -4.0, -4.0, -4.0]]));
    }

    fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a * b).sum()
    }

    proptest! {
        #[test]
        fn transposed_convolution_is_the_adjoint(s in 0u64..1000) {
            let g = geom();
            let mut rng = seed::stream(s, "adjoint");
            let conv = Conv2d::<f64>::glorot(g, &mut rng);
            let mut up = ConvTranspose2d::<f64>::zeros(g);
            up.k.assign(&conv.k);
            let x = Array2::from_shape_simple_fn((2, g.image()), || uniform::<f64>(&mut rng, 1.0));
            let y = Array2::from_shape_simple_fn((2, g.features()), || uniform::<f64>(&mut rng, 1.0));
            let lhs = inner(&conv.forward(x.view()).1, &y);
            let rhs = inner(&x, &up.forward(y.view()));
            prop_assert!((lhs - rhs).abs() < 1e-6, "{} {}", lhs, rhs);
        }

        #[test]
        fn col2im_is_the_adjoint_of_im2col(s in 0u64..1000) {
            let g = geom();
            let mut rng = seed::stream(s, "cols");
            let x = Array2::from_shape_simple_fn((1, g.image()), || uniform::<f64>(&mut rng, 1.0));
            let c = Array2::from_shape_simple_fn((g.positions(), g.patch()), || uniform::<f64>(&mut rng, 1.0));
            let lhs = inner(&g.im2col(x.view()), &c);
            let rhs = inner(&x, &g.col2im(c.view(), 1));
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
