//! Building noisy defect datasets from simulated responses.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::ascan::{synth_ascan_noise_volume, AScanNoiseModel};
use super::invgauss::{sample_invgauss_image, InvGaussParams};
use super::superpose::{reject, superpose_clip, superpose_volume_clip, RejectionPolicy};
use crate::phantom::{FbhSpec, PhantomVolume};
use crate::rng::Rng;
use crate::scan::{CScanImage, DefectOrigin, Dataset, Label, Provenance, VolumeScan};
use crate::sigproc::{envelope_volume, extract_cscans, normalize_by, truncate_walls, GateSpec};
use crate::{Error, Result};

/// A gated, normalized defect volume with the gate windows that image the
/// defect.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectVolume {
    pub volume: VolumeScan,
    pub spec: FbhSpec,
    pub mask: Vec<bool>,
    pub windows: Vec<usize>,
    pub gate: GateSpec,
}

impl DefectVolume {
    /// Labels images cut from this volume (or a noisy copy of it).
    fn label_images(&self, images: Vec<CScanImage>) -> Result<Vec<CScanImage>> {
        let mut out = Vec::with_capacity(self.windows.len());
        let mut images: Vec<Option<CScanImage>> = images.into_iter().map(Some).collect();
        for &w in &self.windows {
            let mut im = images
                .get_mut(w)
                .and_then(Option::take)
                .ok_or_else(|| Error::dim("gate windows", w + 1, 0))?;
            im.label = Label::Defective;
            im.defect_mask = Some(self.mask.clone());
            im.origin = Some(DefectOrigin {
                diameter_mm: self.spec.diameter_mm,
                depth_mm: self.spec.depth_mm,
                center_element: self.spec.center.0,
                center_bscan: self.spec.center.1,
                window: w,
            });
            out.push(im);
        }
        Ok(out)
    }

    /// Noise-free defect images.
    pub fn images(&self) -> Result<Vec<CScanImage>> {
        self.label_images(extract_cscans(&self.volume, &self.gate)?)
    }
}

/// Windows whose in-mask peak reaches `min_fraction` of the best window's.
pub fn defect_windows(images: &[CScanImage], mask: &[bool], min_fraction: f64) -> Vec<usize> {
    let peaks: Vec<f32> = images
        .iter()
        .map(|im| {
            im.pixels
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(&p, _)| p)
                .fold(0.0f32, f32::max)
        })
        .collect();
    let best = peaks.iter().copied().fold(0.0f32, f32::max);
    if best <= 0.0 {
        return Vec::new();
    }
    peaks
        .iter()
        .enumerate()
        .filter(|(_, &p)| p as f64 >= min_fraction * best as f64)
        .map(|(i, _)| i)
        .collect()
}

/// Envelope, per-dataset normalization and wall truncation of a study.
///
/// Each volume is truncated right after its envelope is taken so only the
/// gated region is held in memory; the dataset max is taken before
/// truncation, which makes this identical to normalizing first.
pub fn prepare_defect_volumes(
    study: Vec<PhantomVolume>,
    gate: &GateSpec,
    min_fraction: f64,
) -> Result<Vec<DefectVolume>> {
    let mut max = 0.0f64;
    let mut gated = Vec::with_capacity(study.len());
    let mut rest = Vec::with_capacity(study.len());
    for pv in study {
        let env = envelope_volume(&pv.volume)?;
        max = max.max(env.max_amplitude() as f64);
        gated.push(truncate_walls(&env, gate)?);
        rest.push((pv.spec, pv.mask));
    }
    let gated = normalize_by(gated, max)?;
    gated
        .into_iter()
        .zip(rest)
        .map(|(volume, (spec, mask))| {
            let images = extract_cscans(&volume, gate)?;
            let windows = defect_windows(&images, &mask, min_fraction);
            Ok(DefectVolume {
                volume,
                spec,
                mask,
                windows,
                gate: *gate,
            })
        })
        .collect()
}

/// Envelope, truncate and normalize a defect-free volume by its own max.
pub fn prepare_clean_volume(clean: &VolumeScan, gate: &GateSpec) -> Result<VolumeScan> {
    let env = envelope_volume(clean)?;
    let max = env.max_amplitude() as f64;
    let gated = truncate_walls(&env, gate)?;
    let mut v = normalize_by(alloc::vec![gated], max)?;
    Ok(v.pop().expect("one volume in, one out"))
}

/// Noisy copies of a clean gated volume and the C-scans cut from them.
#[derive(Clone, Debug)]
pub struct NoisyClean {
    pub volumes: Vec<VolumeScan>,
    pub images: Vec<CScanImage>,
}

/// Adds `n_volumes` independent A-scan noise draws to `clean` and images
/// each result. With `windows_per_volume`, a random subset of that many
/// gate windows is kept per volume.
pub fn noisy_clean_images(
    clean: &VolumeScan,
    gate: &GateSpec,
    model: &AScanNoiseModel,
    n_volumes: usize,
    windows_per_volume: Option<usize>,
    rng: &mut Rng,
) -> Result<NoisyClean> {
    if model.mean_structural.len() != clean.n_time() {
        return Err(Error::dim(
            "noise profile length",
            clean.n_time(),
            model.mean_structural.len(),
        ));
    }
    let base = rng.fork().seed();
    let mut out = NoisyClean {
        volumes: Vec::with_capacity(n_volumes),
        images: Vec::new(),
    };
    for v in 0..n_volumes {
        let mut r = Rng::stream(base, v as u64);
        let nv = synth_ascan_noise_volume(model, clean.n_bscans(), &mut r)?;
        let noisy = superpose_volume_clip(clean, &nv)?;
        let images = extract_cscans(&noisy, gate)?;
        let mut keep: Vec<usize> = (0..images.len()).collect();
        if let Some(k) = windows_per_volume {
            r.shuffle(&mut keep);
            keep.truncate(k);
            keep.sort_unstable();
        }
        let mut images: Vec<Option<CScanImage>> = images.into_iter().map(Some).collect();
        out.images
            .extend(keep.iter().filter_map(|&w| images[w].take()));
        out.volumes.push(noisy);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMethod {
    RealNoise,
    CscanNoise,
    AscanNoise,
}

impl NoiseMethod {
    pub fn provenance(self) -> Provenance {
        match self {
            NoiseMethod::RealNoise => Provenance::RealNoise,
            NoiseMethod::CscanNoise => Provenance::CscanNoise,
            NoiseMethod::AscanNoise => Provenance::AscanNoise,
        }
    }
}

#[derive(Clone, Debug)]
pub enum NoiseSource {
    /// Defect-free C-scans (measured, or the experimental analog).
    Real(Vec<CScanImage>),
    CScan(InvGaussParams),
    AScan(AScanNoiseModel),
}

impl NoiseSource {
    pub fn method(&self) -> NoiseMethod {
        match self {
            NoiseSource::Real(_) => NoiseMethod::RealNoise,
            NoiseSource::CScan(_) => NoiseMethod::CscanNoise,
            NoiseSource::AScan(_) => NoiseMethod::AscanNoise,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum DefectSource<'a> {
    Images(&'a [CScanImage]),
    Volumes(&'a [DefectVolume]),
}

#[derive(Clone, Debug)]
pub struct SynthOutcome {
    pub dataset: Dataset,
    pub kept: usize,
    pub rejected: usize,
    pub rejected_origins: Vec<DefectOrigin>,
}

/// Adds noise to every defect image, clips at 1 and drops rejected images.
///
/// Image-level methods sum per pixel; A-scan noise sums per sample on the
/// gated volume before C-scans are extracted and therefore needs volumes.
/// Each image (or volume) draws from its own stream of a seed taken from
/// `rng`.
pub fn make_dataset(
    defects: DefectSource<'_>,
    noise: &NoiseSource,
    policy: &RejectionPolicy,
    rng: &mut Rng,
) -> Result<SynthOutcome> {
    let base = rng.fork().seed();
    let mut candidates: Vec<CScanImage> = Vec::new();
    match (noise, defects) {
        (NoiseSource::AScan(model), DefectSource::Volumes(vols)) => {
            for (i, dv) in vols.iter().enumerate() {
                if model.mean_structural.len() != dv.volume.n_time() {
                    return Err(Error::dim(
                        "noise profile length",
                        dv.volume.n_time(),
                        model.mean_structural.len(),
                    ));
                }
                let mut r = Rng::stream(base, i as u64);
                let nv = synth_ascan_noise_volume(model, dv.volume.n_bscans(), &mut r)?;
                let noisy = superpose_volume_clip(&dv.volume, &nv)?;
                let images = extract_cscans(&noisy, &dv.gate)?;
                candidates.extend(dv.label_images(images)?);
            }
        }
        (NoiseSource::AScan(_), DefectSource::Images(_)) => {
            return Err(Error::invalid(
                "A-scan noise is added before C-scan extraction and needs defect volumes",
            ));
        }
        (_, defects) => {
            let clean: Vec<CScanImage> = match defects {
                DefectSource::Images(ims) => ims.to_vec(),
                DefectSource::Volumes(vols) => {
                    let mut v = Vec::new();
                    for dv in vols {
                        v.extend(dv.images()?);
                    }
                    v
                }
            };
            let mut order: Vec<usize> = Vec::new();
            for (i, d) in clean.iter().enumerate() {
                let mut r = Rng::stream(base, i as u64);
                let n = match noise {
                    NoiseSource::Real(pool) => {
                        if pool.is_empty() {
                            return Err(Error::Insufficient("no real-noise images".into()));
                        }
                        // Draw without replacement, reshuffling when the pool runs out.
                        if order.is_empty() {
                            order = (0..pool.len()).collect();
                            let mut shuffle_rng = Rng::stream(base, u64::MAX - i as u64);
                            shuffle_rng.shuffle(&mut order);
                        }
                        pool[order.pop().expect("non-empty order")].clone()
                    }
                    NoiseSource::CScan(p) => sample_invgauss_image(p, d.width, d.height, &mut r)?,
                    NoiseSource::AScan(_) => unreachable!(),
                };
                candidates.push(superpose_clip(d, &n)?);
            }
        }
    }
    let mut kept = Vec::with_capacity(candidates.len());
    let mut rejected_origins = Vec::new();
    let mut rejected = 0;
    for im in candidates {
        if reject(&im, policy)? {
            rejected += 1;
            if let Some(o) = im.origin {
                rejected_origins.push(o);
            }
        } else {
            kept.push(im);
        }
    }
    let n_kept = kept.len();
    Ok(SynthOutcome {
        dataset: Dataset::new(kept, noise.method().provenance(), base)?,
        kept: n_kept,
        rejected,
        rejected_origins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{clean_volume, parametric_study, PulseSpec, SimDims};
    use crate::sigproc::GateSpec;

    fn study() -> (Vec<DefectVolume>, GateSpec) {
        let dims = SimDims::default();
        let pulse = PulseSpec::default();
        let pvs = parametric_study(&[6.0], &[3.0], &pulse, &dims, &mut Rng::new(1)).unwrap();
        (prepare_defect_volumes(pvs, &dims.gate, 0.1).unwrap(), dims.gate)
    }

    fn clean() -> VolumeScan {
        let dims = SimDims::default();
        prepare_clean_volume(&clean_volume(&PulseSpec::default(), &dims).unwrap(), &dims.gate).unwrap()
    }

    #[test]
    fn defect_windows_threshold() {
        let mask = alloc::vec![true, false];
        let im = |a: f32, b: f32| CScanImage::new(2, 1, alloc::vec![a, b], Label::Clean).unwrap();
        let images = [im(1.0, 0.0), im(0.05, 0.9), im(0.2, 0.0)];
        assert_eq!(defect_windows(&images, &mask, 0.1), [0, 2]);
        assert_eq!(defect_windows(&images, &mask, 0.0), [0, 1, 2]);
        assert!(defect_windows(&[im(0.0, 1.0)], &mask, 0.1).is_empty());
    }

    #[test]
    fn prepared_study_is_gated_and_normalized() {
        let (dvs, gate) = study();
        assert_eq!(dvs.len(), 1);
        let dv = &dvs[0];
        assert_eq!(dv.volume.n_time(), gate.gated_len());
        assert!(dv.volume.max_amplitude() <= 1.0);
        assert!(!dv.windows.is_empty());
        let images = dv.images().unwrap();
        assert_eq!(images.len(), dv.windows.len());
        for im in &images {
            assert_eq!(im.label, Label::Defective);
            assert!(im.defect_mask.is_some());
            assert_eq!(im.origin.unwrap().diameter_mm, 6.0);
        }
    }

    #[test]
    fn silent_ascan_noise_keeps_every_image_unchanged() {
        let (dvs, _) = study();
        let model = AScanNoiseModel::silent(dvs[0].volume.n_time());
        let out = make_dataset(
            DefectSource::Volumes(&dvs),
            &NoiseSource::AScan(model),
            &RejectionPolicy::default(),
            &mut Rng::new(2),
        )
        .unwrap();
        assert_eq!(out.rejected, 0);
        assert_eq!(out.dataset.images, dvs[0].images().unwrap());
        assert_eq!(out.dataset.provenance, Provenance::AscanNoise);
    }

    #[test]
    fn ascan_noise_needs_volumes() {
        let (dvs, _) = study();
        let images = dvs[0].images().unwrap();
        let model = AScanNoiseModel::reference(dvs[0].volume.n_time());
        let r = make_dataset(
            DefectSource::Images(&images),
            &NoiseSource::AScan(model),
            &RejectionPolicy::default(),
            &mut Rng::new(2),
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn profile_length_must_match_volume() {
        let (dvs, _) = study();
        let model = AScanNoiseModel::reference(10);
        let r = make_dataset(
            DefectSource::Volumes(&dvs),
            &NoiseSource::AScan(model),
            &RejectionPolicy::default(),
            &mut Rng::new(2),
        );
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }

    #[test]
    fn empty_real_pool_is_insufficient() {
        let (dvs, _) = study();
        let r = make_dataset(
            DefectSource::Volumes(&dvs),
            &NoiseSource::Real(Vec::new()),
            &RejectionPolicy::default(),
            &mut Rng::new(2),
        );
        assert!(matches!(r, Err(Error::Insufficient(_))));
    }

    #[test]
    fn synthesis_is_deterministic_and_accounts_for_every_candidate() {
        let (dvs, _) = study();
        let noise = NoiseSource::CScan(InvGaussParams::MEASURED);
        let run = |seed| {
            make_dataset(
                DefectSource::Volumes(&dvs),
                &noise,
                &RejectionPolicy::default(),
                &mut Rng::new(seed),
            )
            .unwrap()
        };
        let a = run(3);
        let b = run(3);
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.kept + a.rejected, dvs[0].windows.len());
        assert_eq!(a.rejected_origins.len(), a.rejected);
        for im in &a.dataset.images {
            im.check_range().unwrap();
        }
        assert_ne!(a.dataset.images, run(4).dataset.images);
    }

    #[test]
    fn noisy_clean_counts_and_identity() {
        let c = clean();
        let gate = SimDims::default().gate;
        let silent = AScanNoiseModel::silent(c.n_time());
        let out = noisy_clean_images(&c, &gate, &silent, 2, None, &mut Rng::new(5)).unwrap();
        assert_eq!(out.volumes.len(), 2);
        assert_eq!(out.images.len(), 2 * gate.n_windows());
        assert_eq!(out.volumes[0], c);
        assert_eq!(out.images[..gate.n_windows()], extract_cscans(&c, &gate).unwrap()[..]);

        let model = AScanNoiseModel::reference(c.n_time());
        let a = noisy_clean_images(&c, &gate, &model, 3, Some(7), &mut Rng::new(6)).unwrap();
        let b = noisy_clean_images(&c, &gate, &model, 3, Some(7), &mut Rng::new(6)).unwrap();
        assert_eq!(a.images.len(), 21);
        assert_eq!(a.images, b.images);
        assert!(a.images.iter().all(|im| im.label == Label::Clean));
    }

    #[test]
    fn noisy_clean_rejects_wrong_profile_length() {
        let c = clean();
        let gate = SimDims::default().gate;
        let m = AScanNoiseModel::silent(c.n_time() + 1);
        assert!(noisy_clean_images(&c, &gate, &m, 1, None, &mut Rng::new(1)).is_err());
    }
}
