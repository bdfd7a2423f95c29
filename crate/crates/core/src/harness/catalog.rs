use kmedoids::arrayadapter::LowerTriangle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::POSE_MATCH_TOL;
use crate::error::{Error, Result};
use crate::pose::{forward_kinematics, skeletal_distance, ArmPose, LimbLengths};

const MAX_SWAP_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Clustered,
    Extreme,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub pose: ArmPose,
    pub label: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl PoseCatalog {
    pub fn poses(&self) -> Vec<ArmPose> {
        self.entries.iter().map(|e| e.pose).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn contains(&self, pose: &ArmPose) -> bool {
        self.entries
            .iter()
            .any(|e| e.pose.approx_eq(pose, POSE_MATCH_TOL))
    }

    fn push_extremes(&mut self) {
        for (label, a) in EXTREME_POSES {
            let pose = ArmPose::from_array(a).expect("extreme poses are valid");
            if !self.contains(&pose) {
                self.entries.push(CatalogEntry {
                    pose,
                    label: label.to_string(),
                    provenance: Provenance::Extreme,
                });
            }
        }
    }
}

/// Arm straight down, to the (left) side, forward and straight up.
pub const EXTREME_POSES: [(&str, [f64; 4]); 4] = [
    ("downward", [0.0, 0.0, 0.0, 0.0]),
    ("sideward", [180.0, 90.0, 0.0, 0.0]),
    ("forward", [90.0, 90.0, 0.0, 0.0]),
    ("upward", [0.0, 180.0, 0.0, 0.0]),
];

const MANUAL_POSES: [(&str, [f64; 4]); 6] = [
    ("reach-front-low", [60.0, 45.0, 0.0, 60.0]),
    ("side-bent", [150.0, 70.0, 30.0, 90.0]),
    ("across-body", [100.0, 80.0, -45.0, 45.0]),
    ("overhead-bent", [80.0, 140.0, 20.0, 100.0]),
    ("side-low", [170.0, 30.0, -20.0, 30.0]),
    ("front-high", [90.0, 110.0, 60.0, 75.0]),
];

/// Ten-pose catalog: six hand-picked everyday poses and the four extremes.
pub fn default_catalog() -> PoseCatalog {
    let mut c = PoseCatalog {
        entries: MANUAL_POSES
            .iter()
            .map(|(label, a)| CatalogEntry {
                pose: ArmPose::from_array(*a).expect("manual poses are valid"),
                label: label.to_string(),
                provenance: Provenance::Manual,
            })
            .collect(),
    };
    c.push_extremes();
    c
}

/// Picks `k` medoid poses under the skeletal distance and appends the four
/// extreme poses that are not already among them.
pub fn select_representative_poses(sample: &[ArmPose], k: usize, seed: u64) -> Result<PoseCatalog> {
    if k == 0 || k > sample.len() {
        return Err(Error::invalid(format!(
            "k must be in [1, {}], got {k}",
            sample.len()
        )));
    }
    sample.iter().try_for_each(ArmPose::validate)?;
    let mut poses = sample.to_vec();
    poses.sort_by(|a, b| {
        a.to_array()
            .iter()
            .zip(b.to_array())
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let joints: Vec<_> = poses
        .iter()
        .map(|p| forward_kinematics(p, &LimbLengths::UNIT).as_list())
        .collect();
    let n = poses.len();
    let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for x in 1..n {
        for y in 0..x {
            data.push(skeletal_distance(&joints[x], &joints[y])?);
        }
    }
    let mat = LowerTriangle { n, data };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = kmedoids::random_initialization(n, k, &mut rng);
    let (loss, _, iterations, swaps): (f64, _, _, _) =
        kmedoids::fasterpam(&mat, &mut medoids, MAX_SWAP_ITERATIONS);
    log::debug!("k-medoids: loss {loss}, {iterations} iterations, {swaps} swaps");
    medoids.sort_unstable();

    let mut catalog = PoseCatalog {
        entries: medoids
            .iter()
            .enumerate()
            .map(|(i, m)| CatalogEntry {
                pose: poses[*m],
                label: format!("cluster-{}", i + 1),
                provenance: Provenance::Clustered,
            })
            .collect(),
    };
    catalog.push_extremes();
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::PoseDesign;
    use rand::RngExt;

    fn blob(center: [f64; 4], n: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<ArmPose> {
        (0..n)
            .map(|_| {
                let v = center.map(|c| c + spread * (rng.random::<f64>() - 0.5));
                ArmPose::from_array(v).unwrap()
            })
            .collect()
    }

    #[test]
    fn default_catalog_shape() {
        let c = default_catalog();
        assert_eq!(c.len(), 10);
        assert_eq!(
            c.entries
                .iter()
                .filter(|e| e.provenance == Provenance::Extreme)
                .count(),
            4
        );
        assert!(PoseDesign::new(&c.poses()).is_ok());
    }

    #[test]
    fn single_cluster_medoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sample = blob([40.0, 60.0, 10.0, 50.0], 30, 6.0, &mut rng);
        let center = ArmPose::new(40.0, 60.0, 10.0, 50.0).unwrap();
        sample.push(center);
        let c = select_representative_poses(&sample, 1, 0).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.entries[0].provenance, Provenance::Clustered);
        let d = |p: &ArmPose| crate::pose::pose_distance(p, &center, &LimbLengths::UNIT);
        assert!(d(&c.entries[0].pose) < 0.1);
    }

    #[test]
    fn two_blobs_one_medoid_each() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = blob([30.0, 40.0, 0.0, 30.0], 25, 8.0, &mut rng);
        let b = blob([120.0, 130.0, 40.0, 100.0], 25, 8.0, &mut rng);
        let sample: Vec<_> = a.iter().chain(&b).copied().collect();
        let c = select_representative_poses(&sample, 2, 4).unwrap();
        let meds: Vec<_> = c.entries[..2].iter().map(|e| e.pose).collect();
        let in_a = meds.iter().filter(|m| a.contains(m)).count();
        let in_b = meds.iter().filter(|m| b.contains(m)).count();
        assert_eq!((in_a, in_b), (1, 1));
    }

    #[test]
    fn order_invariant_and_appends_missing_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sample = blob([60.0, 60.0, 20.0, 40.0], 40, 60.0, &mut rng);
        sample.push(ArmPose::REST);
        let c1 = select_representative_poses(&sample, 3, 9).unwrap();
        sample.reverse();
        let c2 = select_representative_poses(&sample, 3, 9).unwrap();
        assert_eq!(c1, c2);
        assert!(c1.len() >= 3 + 3 && c1.len() <= 3 + 4);
        assert!(select_representative_poses(&sample, 42, 0).is_err());
        assert!(select_representative_poses(&sample, 0, 0).is_err());
    }
}
