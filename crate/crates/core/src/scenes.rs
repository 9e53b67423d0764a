//! Reference point-scatterer scenes.

use crate::echo::TargetScene;
use crate::geometry::Vec3;

/// The letters "U", "T", "D" drawn with 21 unit scatterers in the `x = 0`
/// plane: 2 cm lateral pitch, rows at z = 0.44, 0.50 and 0.56 m.
pub fn utd_letters() -> TargetScene {
    const ROWS: [f64; 3] = [0.44, 0.50, 0.56];
    let [a, b, c] = ROWS;
    let yz = [
        // U
        (-0.10, a),
        (-0.10, b),
        (-0.10, c),
        (-0.08, c),
        (-0.06, c),
        (-0.06, b),
        (-0.06, a),
        // T
        (-0.04, a),
        (-0.02, a),
        (0.00, a),
        (0.02, a),
        (0.04, a),
        (0.00, b),
        (0.00, c),
        // D
        (0.03, c),
        (0.06, a),
        (0.06, b),
        (0.06, c),
        (0.08, a),
        (0.08, c),
        (0.10, b),
    ];
    TargetScene::from_points(&yz.map(|(y, z)| Vec3::new(0.0, y, z)))
}
