use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

/// Pinhole intrinsics. Pixel `(u, v)` is sampled at its center `(u+0.5, v+0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::from_fov(80, 60, 90.0)
    }
}

impl CameraModel {
    /// Square-pixel camera with horizontal field of view `fov_x_deg` and the
    /// principal point at the image center.
    pub fn from_fov(width: usize, height: usize, fov_x_deg: f64) -> Self {
        let fx = width as f64 / (2.0 * (fov_x_deg.to_radians() / 2.0).tan());
        Self {
            width,
            height,
            fx,
            fy: fx,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    pub fn fov_x_deg(&self) -> f64 {
        (2.0 * (self.width as f64 / (2.0 * self.fx)).atan()).to_degrees()
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Rotation from body (x forward, y left, z up) to camera (x right, y down,
/// z forward) coordinates for a forward-looking camera.
pub fn forward_mount(pitch_deg: f64) -> Matrix3<f64> {
    let base = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
    // positive pitch tilts the optical axis downwards (rotation about body y)
    let tilt = Rotation3::from_axis_angle(&Vector3::y_axis(), pitch_deg.to_radians());
    base * tilt.inverse().into_inner()
}

/// Camera extrinsics: `rotation` maps world-frame vectors into the camera
/// frame, `center` is the camera position in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub center: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            center: Vector3::zeros(),
        }
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, center: Vector3<f64>) -> Self {
        Self { rotation, center }
    }

    /// Camera at `eye` looking at `target`, with `up` pointing up in the image.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Self {
        let z = (target - eye).normalize();
        let mut x = z.cross(&up);
        if x.norm() < 1e-9 {
            x = z.cross(&Vector3::x());
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let m = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Self {
            rotation: UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m)),
            center: eye,
        }
    }

    /// Camera rigidly mounted on a body with orientation `body_to_world`.
    pub fn from_body(position: Vector3<f64>, body_to_world: &UnitQuaternion<f64>, mount: &Matrix3<f64>) -> Self {
        let m = mount * body_to_world.inverse().to_rotation_matrix().into_inner();
        Self {
            rotation: UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m)),
            center: position,
        }
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * (p - self.center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fov_roundtrip() {
        let cam = CameraModel::from_fov(80, 60, 90.0);
        assert!((cam.fx - 40.0).abs() < 1e-12);
        assert!((cam.fov_x_deg() - 90.0).abs() < 1e-9);
        assert_eq!((cam.cx, cam.cy), (40.0, 30.0));
    }

    #[test]
    fn look_at_puts_target_on_axis() {
        let pose = Pose::look_at(Vector3::new(1.0, 2.0, 0.5), Vector3::new(4.0, -1.0, 1.5), Vector3::z());
        let p = pose.world_to_camera(&Vector3::new(4.0, -1.0, 1.5));
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12 && p.z > 0.0);
    }

    #[test]
    fn body_mount_looks_along_body_x() {
        let q = UnitQuaternion::from_euler_angles(0.0, 0.0, 0.7);
        let pose = Pose::from_body(Vector3::zeros(), &q, &forward_mount(0.0));
        let ahead = q * Vector3::x();
        let left = q * Vector3::y();
        let c = pose.world_to_camera(&ahead);
        assert!((c - Vector3::z()).norm() < 1e-12);
        // body left is image left (negative camera x)
        assert!((pose.world_to_camera(&left) + Vector3::x()).norm() < 1e-12);
        // world up is image up (negative camera y)
        assert!((pose.world_to_camera(&Vector3::z()) + Vector3::y()).norm() < 1e-12);
    }

    #[test]
    fn mount_pitch_tilts_axis_down() {
        let pose = Pose::from_body(Vector3::zeros(), &UnitQuaternion::identity(), &forward_mount(30.0));
        let below = Vector3::new(30f64.to_radians().cos(), 0.0, -30f64.to_radians().sin());
        assert!((pose.world_to_camera(&below) - Vector3::z()).norm() < 1e-12);
    }
}
