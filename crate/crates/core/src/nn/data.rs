use alloc::vec::Vec;

use crate::rng::Rng;
use crate::scan::{CScanImage, Dataset, Label};
use crate::{Error, Result};

/// Square single-channel inputs with binary targets, flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    side: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Samples {
    pub fn new(side: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("input side must be >= 1"));
        }
        if inputs.len() != targets.len() * side * side {
            return Err(Error::dim("sample inputs", targets.len() * side * side, inputs.len()));
        }
        if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::range("targets must lie in [0, 1]"));
        }
        Ok(Self {
            side,
            inputs,
            targets,
        })
    }

    pub fn from_images(images: &[CScanImage]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::Insufficient("no images".into()))?;
        if first.width != first.height {
            return Err(Error::invalid("model inputs must be square"));
        }
        let side = first.width;
        let mut inputs = Vec::with_capacity(images.len() * side * side);
        let mut targets = Vec::with_capacity(images.len());
        for img in images {
            if !img.same_shape(first) {
                return Err(Error::dim("image width", side, img.width));
            }
            inputs.extend(img.pixels.iter().map(|&p| p as f64));
            targets.push(img.label.target());
        }
        Self::new(side, inputs, targets)
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Self::from_images(&ds.images)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let n = self.side * self.side;
        &self.inputs[i * n..(i + 1) * n]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn is_positive(&self, i: usize) -> bool {
        self.targets[i] >= 0.5
    }

    pub fn truth(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_positive(i)).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(idx.len() * self.side * self.side);
        for &i in idx {
            inputs.extend_from_slice(self.input(i));
        }
        Self {
            side: self.side,
            inputs,
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    pub fn concat(&self, other: &Samples) -> Result<Self> {
        if self.side != other.side {
            return Err(Error::dim("sample side", self.side, other.side));
        }
        let mut s = self.clone();
        s.inputs.extend_from_slice(&other.inputs);
        s.targets.extend_from_slice(&other.targets);
        Ok(s)
    }

    /// Indices of the negative and positive class.
    pub fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.len()).partition(|&i| !self.is_positive(i))
    }

    pub fn has_both_classes(&self) -> bool {
        let (neg, pos) = self.class_indices();
        !neg.is_empty() && !pos.is_empty()
    }

    /// Split into `(train, test)` index sets, holding out
    /// `round(test_fraction * n_class)` of each class.
    pub fn stratified_split(&self, test_fraction: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
        let (neg, pos) = self.class_indices();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut class in [neg, pos] {
            rng.shuffle(&mut class);
            let k = libm::round(test_fraction * class.len() as f64) as usize;
            test.extend_from_slice(&class[..k]);
            train.extend_from_slice(&class[k..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        (train, test)
    }
}

/// Label from a target, thresholded at 0.5.
pub fn label_of(target: f64) -> Label {
    if target >= 0.5 {
        Label::Defective
    } else {
        Label::Clean
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_split_keeps_class_ratio() {
        let targets: Vec<f64> = (0..50).map(|i| if i < 20 { 1.0 } else { 0.0 }).collect();
        let s = Samples::new(1, vec_of(50), targets).unwrap();
        let (train, test) = s.stratified_split(0.2, &mut Rng::new(5));
        assert_eq!(test.len(), 10);
        assert_eq!(test.iter().filter(|&&i| s.is_positive(i)).count(), 4);
        let mut all = [train, test].concat();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    fn vec_of(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }
}
