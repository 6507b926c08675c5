//! Indoor geometry: the room, wall-mounted panel arrays and user placements.
//!
//! Coordinates are in meters with the origin at one floor corner of the room.
//! `x` runs along the room length, `y` along the width and `z` upward. The two
//! long walls are the planes `y = 0` and `y = width_m`; panels hang on them and
//! face the opposite wall.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LisError, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default height of the plane users are placed on.
pub const DEFAULT_PLANE_HEIGHT_M: f64 = 1.5;

/// Minimum user-to-wall distance, in wavelengths.
pub const WALL_CLEARANCE_WAVELENGTHS: f64 = 10.0;

pub type Point3 = Vector3<f64>;

/// Rectangular room footprint and carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomSpec {
    pub length_m: f64,
    pub width_m: f64,
    pub carrier_hz: f64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        Self {
            length_m: 30.0,
            width_m: 20.0,
            carrier_hz: 3.2e9,
        }
    }
}

impl RoomSpec {
    pub fn new(length_m: f64, width_m: f64, carrier_hz: f64) -> Result<Self> {
        let room = Self {
            length_m,
            width_m,
            carrier_hz,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return Err(invalid("length_m", "must be positive"));
        }
        if !(self.width_m > 0.0 && self.width_m.is_finite()) {
            return Err(invalid("width_m", "must be positive"));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(invalid("carrier_hz", "must be positive"));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

/// A rectangular grid of antennas on a flat panel.
///
/// Antenna `(row, col)` sits at `origin + col * spacing * width_dir + row * spacing * up`,
/// where `up = normal × width_dir`. Row 0 is the bottom row.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub origin: Point3,
    pub normal: Point3,
    pub width_dir: Point3,
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
}

impl PanelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("panel", "rows and cols must be at least 1"));
        }
        if (self.normal.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid("panel.normal", "must be a unit vector"));
        }
        if (self.width_dir.norm() - 1.0).abs() > 1e-12 || self.normal.dot(&self.width_dir).abs() > 1e-12 {
            return Err(invalid(
                "panel.width_dir",
                "must be a unit vector orthogonal to the normal",
            ));
        }
        if !(self.spacing_m > 0.0) {
            return Err(invalid("panel.spacing_m", "must be positive"));
        }
        Ok(())
    }

    pub fn antenna_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn up_dir(&self) -> Point3 {
        self.normal.cross(&self.width_dir)
    }

    /// Antenna positions, row-major from the bottom-left antenna.
    pub fn positions(&self) -> Vec<Point3> {
        let up = self.up_dir();
        let mut out = Vec::with_capacity(self.antenna_count());
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(
                    self.origin
                        + self.width_dir * (c as f64 * self.spacing_m)
                        + up * (r as f64 * self.spacing_m),
                );
            }
        }
        out
    }

    pub fn center(&self) -> Point3 {
        self.origin
            + self.width_dir * ((self.cols - 1) as f64 * self.spacing_m / 2.0)
            + self.up_dir() * ((self.rows - 1) as f64 * self.spacing_m / 2.0)
    }
}

/// All antennas of the surface, grouped panel by panel.
///
/// Antennas of panel `p` occupy indices `p * N .. (p + 1) * N`.
#[derive(Debug, Clone)]
pub struct AntennaArray {
    pub positions: Vec<Point3>,
    pub normals: Vec<Point3>,
    pub panel_index: Vec<usize>,
    pub panel_count: usize,
    pub antennas_per_panel: usize,
    pub panels: Vec<PanelSpec>,
}

impl AntennaArray {
    pub fn from_panels(panels: Vec<PanelSpec>) -> Result<Self> {
        let first = panels
            .first()
            .ok_or_else(|| invalid("panels", "at least one panel is required"))?;
        let per_panel = first.antenna_count();
        let mut positions = Vec::new();
        let mut normals = Vec::new();
        let mut panel_index = Vec::new();
        for (p, panel) in panels.iter().enumerate() {
            panel.validate()?;
            if panel.antenna_count() != per_panel {
                return Err(LisError::DimensionMismatch {
                    context: "antennas per panel",
                    expected: per_panel,
                    actual: panel.antenna_count(),
                });
            }
            for pos in panel.positions() {
                positions.push(pos);
                normals.push(panel.normal);
                panel_index.push(p);
            }
        }
        Ok(Self {
            positions,
            normals,
            panel_index,
            panel_count: panels.len(),
            antennas_per_panel: per_panel,
            panels,
        })
    }

    pub fn total_antennas(&self) -> usize {
        self.positions.len()
    }

    pub fn panel_range(&self, panel: usize) -> std::ops::Range<usize> {
        panel * self.antennas_per_panel..(panel + 1) * self.antennas_per_panel
    }
}

/// Users on a horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct UePlacement {
    pub positions: Vec<Point3>,
    pub plane_height_m: f64,
}

impl UePlacement {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// `(rows, cols)` of a panel holding `n` antennas: square for even powers of
/// two, otherwise twice as wide as high.
pub fn panel_shape(n: usize) -> Result<(usize, usize)> {
    if n == 0 || !n.is_power_of_two() {
        return Err(LisError::Layout(format!(
            "{n} antennas per panel is not a power of two, so it cannot form a square or 2:1 grid"
        )));
    }
    let exp = n.trailing_zeros();
    let rows = 1usize << (exp / 2);
    Ok((rows, n / rows))
}

/// Lays `total_antennas` out as `panel_count` equal panels on the two long walls.
///
/// One panel goes to the center of the `y = 0` wall. Otherwise each wall gets
/// `panel_count / 2` panels centered at `(i + 0.5) * length / (panel_count / 2)`,
/// and the panels on `y = width` mirror those on `y = 0`. The bottom antenna row
/// is at `plane_height_m`.
pub fn build_wall_layout(
    room: &RoomSpec,
    total_antennas: usize,
    panel_count: usize,
    plane_height_m: f64,
) -> Result<AntennaArray> {
    room.validate()?;
    if panel_count == 0 {
        return Err(LisError::Layout("panel count must be at least 1".into()));
    }
    if panel_count > 1 && !panel_count.is_multiple_of(2) {
        return Err(LisError::Layout(format!(
            "{panel_count} panels cannot be split evenly over two walls"
        )));
    }
    if !total_antennas.is_multiple_of(panel_count) {
        return Err(LisError::Layout(format!(
            "{total_antennas} antennas do not divide into {panel_count} equal panels"
        )));
    }
    if !plane_height_m.is_finite() {
        return Err(invalid("plane_height_m", "must be finite"));
    }
    let n = total_antennas / panel_count;
    let (rows, cols) = panel_shape(n)?;
    let spacing = room.wavelength_m() / 2.0;
    let panel_width = (cols - 1) as f64 * spacing;

    let per_wall = panel_count.div_ceil(2);
    let slot = room.length_m / per_wall as f64;
    // Panels must not touch their neighbours or the end walls.
    if panel_width + spacing > slot {
        return Err(LisError::Layout(format!(
            "{per_wall} panels of width {panel_width:.3} m do not fit along a {:.1} m wall",
            room.length_m
        )));
    }

    let up = Vector3::z();
    let walls: &[(f64, Point3)] = if panel_count == 1 {
        &[(0.0, Vector3::new(0.0, 1.0, 0.0))]
    } else {
        &[
            (0.0, Vector3::new(0.0, 1.0, 0.0)),
            (room.width_m, Vector3::new(0.0, -1.0, 0.0)),
        ]
    };

    let mut panels = Vec::with_capacity(panel_count);
    for &(wall_y, normal) in walls {
        // width_dir chosen so that normal × width_dir points up.
        let width_dir = up.cross(&normal);
        for i in 0..per_wall {
            let center_x = (i as f64 + 0.5) * slot;
            let mut origin = Vector3::new(center_x, wall_y, plane_height_m);
            origin -= width_dir * (panel_width / 2.0);
            panels.push(PanelSpec {
                origin,
                normal,
                width_dir,
                rows,
                cols,
                spacing_m: spacing,
            });
        }
    }
    AntennaArray::from_panels(panels)
}

/// Draws `k` users uniformly on the plane at `plane_height_m`, at least ten
/// wavelengths from every wall.
pub fn place_users(room: &RoomSpec, k: usize, plane_height_m: f64, rng_seed: u64) -> Result<UePlacement> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    place_users_with(room, k, plane_height_m, &mut rng)
}

pub fn place_users_with<R: Rng + ?Sized>(
    room: &RoomSpec,
    k: usize,
    plane_height_m: f64,
    rng: &mut R,
) -> Result<UePlacement> {
    room.validate()?;
    if k == 0 {
        return Err(LisError::Placement("at least one user is required".into()));
    }
    let inset = WALL_CLEARANCE_WAVELENGTHS * room.wavelength_m();
    let (x_lo, x_hi) = (inset, room.length_m - inset);
    let (y_lo, y_hi) = (inset, room.width_m - inset);
    if x_lo >= x_hi || y_lo >= y_hi {
        return Err(LisError::Placement(format!(
            "room {}x{} m leaves no area {inset:.3} m away from the walls",
            room.length_m, room.width_m
        )));
    }
    let positions = (0..k)
        .map(|_| {
            Vector3::new(
                rng.random_range(x_lo..=x_hi),
                rng.random_range(y_lo..=y_hi),
                plane_height_m,
            )
        })
        .collect();
    Ok(UePlacement {
        positions,
        plane_height_m,
    })
}
