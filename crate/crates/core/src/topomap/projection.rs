use crate::error::{Error, Result};
use crate::signal::Montage;

/// Electrode positions flattened onto the plane by azimuthal equidistant
/// projection about the vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedLayout {
    pub labels: Vec<String>,
    pub points: Vec<[f64; 2]>,
}

impl ProjectedLayout {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest distance of any electrode from the projection centre.
    pub fn max_radius(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max)
    }
}

/// Projects a unit vector: the planar radius is the great-circle angle from
/// `+z`, the planar direction is the azimuth.
pub fn project_point(label: &str, [x, y, z]: [f64; 3]) -> Result<[f64; 2]> {
    let planar = x.hypot(y);
    let theta = planar.atan2(z);
    if planar == 0.0 {
        return if z > 0.0 {
            Ok([0.0, 0.0])
        } else {
            Err(Error::Antipodal(label.to_string()))
        };
    }
    if std::f64::consts::PI - theta < 1e-9 {
        return Err(Error::Antipodal(label.to_string()));
    }
    Ok([theta * x / planar, theta * y / planar])
}

pub fn project(montage: &Montage) -> Result<ProjectedLayout> {
    let mut labels = Vec::with_capacity(montage.len());
    let mut points = Vec::with_capacity(montage.len());
    for (label, pos) in montage.iter() {
        points.push(project_point(label, pos)?);
        labels.push(label.to_string());
    }
    Ok(ProjectedLayout { labels, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vertex_maps_to_origin() {
        let layout = project(&Montage::standard_32()).unwrap();
        let cz = layout.labels.iter().position(|l| l == "Cz").unwrap();
        assert_eq!(layout.points[cz], [0.0, 0.0]);
    }

    #[test]
    fn mirrored_electrodes_mirror_on_the_map() {
        let m = Montage::standard_32();
        let layout = project(&m).unwrap();
        let at = |l: &str| layout.points[layout.labels.iter().position(|x| x == l).unwrap()];
        // left/right pairs mirror across the sagittal plane
        for (left, right) in [("F3", "F4"), ("T7", "T8"), ("PO3", "PO4"), ("Fp1", "Fp2")] {
            let (a, b) = (at(left), at(right));
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12);
        }
        // front/back pairs mirror across the coronal plane
        for (front, back) in [("F3", "P3"), ("Fz", "Pz"), ("FC1", "CP1")] {
            let (a, b) = (at(front), at(back));
            assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn antipode_is_rejected() {
        let m = Montage::new([("Cz", [0.0, 0.0, 1.0]), ("Bad", [0.0, 0.0, -1.0])]).unwrap();
        assert!(matches!(project(&m), Err(Error::Antipodal(l)) if l == "Bad"));
    }

    proptest! {
        #[test]
        fn radius_is_the_polar_angle(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let n = (x * x + y * y + z * z).sqrt();
            prop_assume!(n > 1e-3);
            let (x, y, z) = (x / n, y / n, z / n);
            prop_assume!(z.abs() < 0.999);
            let p = project_point("e", [x, y, z]).unwrap();
            prop_assert!((p[0].hypot(p[1]) - z.clamp(-1.0, 1.0).acos()).abs() < 1e-12);
            if x.hypot(y) > 1e-9 {
                prop_assert!((p[1].atan2(p[0]) - y.atan2(x)).abs() < 1e-9);
            }
        }
    }
}
