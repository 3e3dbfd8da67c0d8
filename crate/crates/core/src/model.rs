//! The probabilistic-classifier interface shared by the black box, the
//! surrogates and hand-built test models.

use alloc::vec::Vec;
use core::fmt;

use crate::data::Matrix;
use crate::math::argmax;

pub trait Classifier {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;

    /// Class distribution for one row of width [`Classifier::n_features`].
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64>;

    /// Row-wise class distributions as an `N x C` matrix.
    fn predict_proba(&self, x: &Matrix) -> Matrix {
        let c = self.n_classes();
        let mut values = Vec::with_capacity(x.rows * c);
        for row in x.iter_rows() {
            values.extend(self.predict_proba_row(row));
        }
        Matrix {
            rows: x.rows,
            cols: c,
            values,
        }
    }

    fn predict_row(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba_row(x))
    }

    fn predict(&self, x: &Matrix) -> Vec<usize> {
        let p = self.predict_proba(x);
        p.iter_rows().map(argmax).collect()
    }
}

impl<T: Classifier + ?Sized> Classifier for &T {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        (**self).predict_proba_row(x)
    }
    fn predict_proba(&self, x: &Matrix) -> Matrix {
        (**self).predict_proba(x)
    }
}

/// Adapts a closure `row -> class distribution` into a [`Classifier`].
pub struct FnClassifier<F> {
    pub n_features: usize,
    pub n_classes: usize,
    pub f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(n_features: usize, n_classes: usize, f: F) -> Self {
        FnClassifier {
            n_features,
            n_classes,
            f,
        }
    }
}

impl<F> fmt::Debug for FnClassifier<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnClassifier")
            .field("n_features", &self.n_features)
            .field("n_classes", &self.n_classes)
            .finish()
    }
}

impl<F> Classifier for FnClassifier<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// Views a full-width classifier through a column subset: rows of the
/// reduced space are written into a copy of `anchor` before prediction.
#[derive(Debug, Clone)]
pub struct Embedded<'a, C> {
    pub inner: &'a C,
    pub anchor: Vec<f64>,
    pub columns: Vec<usize>,
}

impl<C: Classifier> Classifier for Embedded<'_, C> {
    fn n_features(&self) -> usize {
        self.columns.len()
    }
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.anchor.clone();
        for (&j, &v) in self.columns.iter().zip(x) {
            full[j] = v;
        }
        self.inner.predict_proba_row(&full)
    }
    fn predict_proba(&self, x: &Matrix) -> Matrix {
        let mut full = Matrix::zeros(x.rows, self.anchor.len());
        for (i, r) in x.iter_rows().enumerate() {
            let dst = full.row_mut(i);
            dst.copy_from_slice(&self.anchor);
            for (&j, &v) in self.columns.iter().zip(r) {
                dst[j] = v;
            }
        }
        self.inner.predict_proba(&full)
    }
}
