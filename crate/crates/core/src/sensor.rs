//! The continuous virtual sensor: express a point cloud in a sensor frame,
//! keep the points inside an axis-aligned volume, and project them
//! orthographically onto fixed-resolution nearest-distance images.

use nalgebra::{Matrix3, Vector3};
use std::io::{self, Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("rotation is not orthonormal with unit determinant (residual {residual:.3e})")]
    BadRotation { residual: f64 },
    #[error("volume extents must be positive, got ({0}, {1}, {2})")]
    BadExtents(f64, f64, f64),
    #[error("image resolution must be positive")]
    BadResolution,
    #[error("a projection needs at least one view")]
    NoViews,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("binary height map is malformed: {0}")]
    BadFormat(String),
}

/// A list of 3D points in meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A rigid transform: orthonormal rotation (det +1 within 1e-9) plus
/// translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, SensorError> {
        let residual = (rotation.transpose() * rotation - Matrix3::identity()).norm()
            + (rotation.determinant() - 1.0).abs();
        if residual > 1e-9 {
            return Err(SensorError::BadRotation { residual });
        }
        Ok(Pose { rotation, translation })
    }

    pub fn identity() -> Self {
        Pose { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Pose { rotation: Matrix3::identity(), translation }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(axis),
            angle,
        );
        Pose { rotation: rotation.into_inner(), translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Applies this pose to a point: R p + t.
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// self then other: (other ∘ self)(p) = other(self(p)).
    pub fn then(&self, other: &Pose) -> Pose {
        Pose {
            rotation: other.rotation * self.rotation,
            translation: other.rotation * self.translation + other.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }
}

/// Axis-aligned box extents in meters, centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Volume {
    pub extents: Vector3<f64>,
}

impl Volume {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, SensorError> {
        if x > 0.0 && y > 0.0 && z > 0.0 {
            Ok(Volume { extents: Vector3::new(x, y, z) })
        } else {
            Err(SensorError::BadExtents(x, y, z))
        }
    }

    pub fn cubic(side: f64) -> Result<Self, SensorError> {
        Self::new(side, side, side)
    }
}

/// Direction the sensor looks along for one image channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewAxis {
    XPos,
    XNeg,
    YPos,
    YNeg,
    ZPos,
    /// Looking down from above; the customary height-map view.
    ZNeg,
}

impl ViewAxis {
    fn direction(&self) -> Vector3<f64> {
        match self {
            ViewAxis::XPos => Vector3::new(1.0, 0.0, 0.0),
            ViewAxis::XNeg => Vector3::new(-1.0, 0.0, 0.0),
            ViewAxis::YPos => Vector3::new(0.0, 1.0, 0.0),
            ViewAxis::YNeg => Vector3::new(0.0, -1.0, 0.0),
            ViewAxis::ZPos => Vector3::new(0.0, 0.0, 1.0),
            ViewAxis::ZNeg => Vector3::new(0.0, 0.0, -1.0),
        }
    }

    /// In-plane axes (image columns, image rows): the two non-view axes in
    /// (x, y, z) order.
    fn plane_axes(&self) -> (usize, usize) {
        match self {
            ViewAxis::XPos | ViewAxis::XNeg => (1, 2),
            ViewAxis::YPos | ViewAxis::YNeg => (0, 2),
            ViewAxis::ZPos | ViewAxis::ZNeg => (0, 1),
        }
    }

    fn depth_axis(&self) -> usize {
        match self {
            ViewAxis::XPos | ViewAxis::XNeg => 0,
            ViewAxis::YPos | ViewAxis::YNeg => 1,
            ViewAxis::ZPos | ViewAxis::ZNeg => 2,
        }
    }
}

/// Where pixel distances are measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceReference {
    /// From the face the gaze enters: foreground values span [0, extent] and
    /// empty pixels read the full extent. The default.
    #[default]
    NearFace,
    /// Signed distance from the plane through the origin: values span
    /// [-extent/2, extent/2] and empty pixels read extent/2.
    CenterPlane,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSpec {
    pub nx: usize,
    pub ny: usize,
    pub views: Vec<ViewAxis>,
    pub reference: DistanceReference,
}

impl ProjectionSpec {
    /// Single overhead channel at the given resolution.
    pub fn overhead(nx: usize, ny: usize) -> Result<Self, SensorError> {
        Self::new(nx, ny, vec![ViewAxis::ZNeg], DistanceReference::NearFace)
    }

    pub fn new(
        nx: usize,
        ny: usize,
        views: Vec<ViewAxis>,
        reference: DistanceReference,
    ) -> Result<Self, SensorError> {
        if nx == 0 || ny == 0 {
            return Err(SensorError::BadResolution);
        }
        if views.is_empty() {
            return Err(SensorError::NoViews);
        }
        Ok(ProjectionSpec { nx, ny, views, reference })
    }
}

/// One channel of a projected image, row-major, `ny` rows of `nx` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub view: ViewAxis,
    pub background: f64,
    pub data: Vec<f64>,
}

/// Fixed-resolution multi-channel nearest-distance image.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub nx: usize,
    pub ny: usize,
    pub extents: Vector3<f64>,
    pub channels: Vec<Channel>,
}

impl HeightMap {
    pub fn pixel(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.channels[channel].data[row * self.nx + col]
    }

    /// Flat binary layout: three little-endian u32 dims (channels, nx, ny),
    /// three little-endian f32 extents, then per channel the row-major f32
    /// pixels.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<(), SensorError> {
        for dim in [self.channels.len() as u32, self.nx as u32, self.ny as u32] {
            w.write_all(&dim.to_le_bytes())?;
        }
        for e in [self.extents.x, self.extents.y, self.extents.z] {
            w.write_all(&(e as f32).to_le_bytes())?;
        }
        for ch in &self.channels {
            for v in &ch.data {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads the binary layout back; views and reference are not stored, so
    /// channels come back tagged with the overhead view.
    pub fn read_binary<R: Read>(r: &mut R) -> Result<HeightMap, SensorError> {
        let mut u32buf = [0u8; 4];
        let mut dims = [0u32; 3];
        for d in &mut dims {
            r.read_exact(&mut u32buf)?;
            *d = u32::from_le_bytes(u32buf);
        }
        let [n_ch, nx, ny] = dims;
        if nx == 0 || ny == 0 {
            return Err(SensorError::BadFormat("zero resolution".into()));
        }
        let mut ext = [0f32; 3];
        for e in &mut ext {
            r.read_exact(&mut u32buf)?;
            *e = f32::from_le_bytes(u32buf);
        }
        let mut channels = Vec::with_capacity(n_ch as usize);
        for _ in 0..n_ch {
            let mut data = Vec::with_capacity((nx * ny) as usize);
            for _ in 0..nx * ny {
                r.read_exact(&mut u32buf)?;
                data.push(f32::from_le_bytes(u32buf) as f64);
            }
            channels.push(Channel { view: ViewAxis::ZNeg, background: 0.0, data });
        }
        Ok(HeightMap {
            nx: nx as usize,
            ny: ny as usize,
            extents: Vector3::new(ext[0] as f64, ext[1] as f64, ext[2] as f64),
            channels,
        })
    }

    /// Long-form CSV for inspection: channel,row,col,value.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), SensorError> {
        writeln!(w, "channel,row,col,value")?;
        for (c, ch) in self.channels.iter().enumerate() {
            for row in 0..self.ny {
                for col in 0..self.nx {
                    writeln!(w, "{c},{row},{col},{}", ch.data[row * self.nx + col])?;
                }
            }
        }
        Ok(())
    }
}

/// Expresses a world-frame cloud in the sensor frame: p -> R^T (p - t).
pub fn trans(pose: &Pose, cloud: &PointCloud) -> PointCloud {
    let inv = pose.inverse();
    PointCloud::new(cloud.points.iter().map(|p| inv.apply(p)).collect())
}

/// Keeps exactly the points inside the origin-centered box, boundary
/// included, preserving order.
pub fn crop(cloud: &PointCloud, volume: &Volume) -> PointCloud {
    let h = volume.extents / 2.0;
    PointCloud::new(
        cloud
            .points
            .iter()
            .filter(|p| p.x.abs() <= h.x && p.y.abs() <= h.y && p.z.abs() <= h.z)
            .copied()
            .collect(),
    )
}

fn bin_index(coord: f64, half_extent: f64, bins: usize) -> usize {
    // Half-open bins, except the final bin closes so the far boundary is
    // covered.
    let step = 2.0 * half_extent / bins as f64;
    let idx = ((coord + half_extent) / step).floor() as isize;
    idx.clamp(0, bins as isize - 1) as usize
}

/// Projects an already-cropped cloud onto one image per view: each pixel is
/// the smallest distance among the points above it, empty pixels read the
/// background (the farthest representable distance).
pub fn proj(cloud: &PointCloud, volume: &Volume, spec: &ProjectionSpec) -> HeightMap {
    let half = volume.extents / 2.0;
    let mut channels = Vec::with_capacity(spec.views.len());
    for view in &spec.views {
        let dir = view.direction();
        let (ca, ra) = view.plane_axes();
        let depth_extent = volume.extents[view.depth_axis()];
        let background = match spec.reference {
            DistanceReference::NearFace => depth_extent,
            DistanceReference::CenterPlane => depth_extent / 2.0,
        };
        let mut data = vec![background; spec.nx * spec.ny];
        for p in &cloud.points {
            if p.x.abs() > half.x || p.y.abs() > half.y || p.z.abs() > half.z {
                continue;
            }
            let col = bin_index(p[ca], half[ca], spec.nx);
            let row = bin_index(p[ra], half[ra], spec.ny);
            let along = p.dot(&dir);
            let distance = match spec.reference {
                DistanceReference::NearFace => along + depth_extent / 2.0,
                DistanceReference::CenterPlane => along,
            };
            let slot = &mut data[row * spec.nx + col];
            if distance < *slot {
                *slot = distance;
            }
        }
        channels.push(Channel { view: *view, background, data });
    }
    HeightMap { nx: spec.nx, ny: spec.ny, extents: volume.extents, channels }
}

/// The full sensor: express the cloud at the sensor pose, keep the volume,
/// project. Exactly proj ∘ crop ∘ trans.
pub fn sense(cloud: &PointCloud, pose: &Pose, volume: &Volume, spec: &ProjectionSpec) -> HeightMap {
    proj(&crop(&trans(pose, cloud), volume), volume, spec)
}

/// Slow reference implementations kept deliberately separate from the fast
/// paths so validation compares two independent routes.
pub mod reference {
    use super::*;

    /// Per-pixel brute force: for every pixel, scan every point with
    /// explicit interval membership tests and take the smallest distance.
    pub fn proj_by_pixel_scan(cloud: &PointCloud, volume: &Volume, spec: &ProjectionSpec) -> HeightMap {
        let half = volume.extents / 2.0;
        let mut channels = Vec::with_capacity(spec.views.len());
        for view in &spec.views {
            let dir = view.direction();
            let (ca, ra) = view.plane_axes();
            let depth_extent = volume.extents[view.depth_axis()];
            let background = match spec.reference {
                DistanceReference::NearFace => depth_extent,
                DistanceReference::CenterPlane => depth_extent / 2.0,
            };
            let col_step = volume.extents[ca] / spec.nx as f64;
            let row_step = volume.extents[ra] / spec.ny as f64;
            let mut data = vec![background; spec.nx * spec.ny];
            for row in 0..spec.ny {
                for col in 0..spec.nx {
                    let c_lo = -half[ca] + col as f64 * col_step;
                    let r_lo = -half[ra] + row as f64 * row_step;
                    let mut best = background;
                    for p in &cloud.points {
                        if p.x.abs() > half.x || p.y.abs() > half.y || p.z.abs() > half.z {
                            continue;
                        }
                        let in_col = if col + 1 == spec.nx {
                            p[ca] >= c_lo && p[ca] <= half[ca]
                        } else {
                            p[ca] >= c_lo && p[ca] < c_lo + col_step
                        };
                        let in_row = if row + 1 == spec.ny {
                            p[ra] >= r_lo && p[ra] <= half[ra]
                        } else {
                            p[ra] >= r_lo && p[ra] < r_lo + row_step
                        };
                        if in_col && in_row {
                            let along = p.dot(&dir);
                            let d = match spec.reference {
                                DistanceReference::NearFace => along + depth_extent / 2.0,
                                DistanceReference::CenterPlane => along,
                            };
                            best = best.min(d);
                        }
                    }
                    data[row * spec.nx + col] = best;
                }
            }
            channels.push(Channel { view: *view, background, data });
        }
        HeightMap { nx: spec.nx, ny: spec.ny, extents: volume.extents, channels }
    }

    /// Componentwise predicate filter, the reference for crop.
    pub fn crop_by_predicate(cloud: &PointCloud, volume: &Volume) -> PointCloud {
        let h = volume.extents / 2.0;
        PointCloud::new(
            cloud
                .points
                .iter()
                .filter(|p| p.x.abs() <= h.x && p.y.abs() <= h.y && p.z.abs() <= h.z)
                .copied()
                .collect(),
        )
    }
}
