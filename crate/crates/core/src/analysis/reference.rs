//! Published result grids, transcribed as printed.
//!
//! Rows follow [`T_SETUPS_MIN`], columns follow [`P_SLEEPS_W`].

/// Setup times, minutes.
pub const T_SETUPS_MIN: [f64; 5] = [15.0, 16.0, 17.0, 18.0, 19.0];

/// Sleep power, watts.
pub const P_SLEEPS_W: [f64; 4] = [0.0, 28.0, 56.0, 84.0];

/// Average power, watts.
pub const P_AVG_W: [[f64; 4]; 5] = [
    [1000.0, 1279.0, 1558.0, 1837.0],
    [937.0, 1216.0, 1495.0, 1774.0],
    [833.0, 1161.0, 1440.0, 1719.0],
    [883.0, 1112.0, 1391.0, 1678.0],
    [789.0, 1068.0, 1347.0, 1620.0],
];

/// Performance per watt, (ms * W)^-1.
pub const PPW: [[f64; 4]; 5] = [
    [2e-6, 1.5e-6, 1e-6, 1e-6],
    [2e-6, 1.8e-6, 1.5e-6, 1.3e-6],
    [3e-6, 2e-6, 2e-6, 1.3e-6],
    [5e-6, 4e-6, 3e-6, 2e-6],
    [6e-6, 4e-6, 4e-6, 3e-6],
];

/// Normalized performance per watt.
pub const NPPW: [[f64; 4]; 5] = [
    [1.17, 0.89, 0.59, 0.59],
    [1.17, 1.06, 0.89, 0.76],
    [1.76, 1.17, 1.17, 0.94],
    [2.9, 2.35, 1.76, 1.17],
    [3.53, 2.35, 2.35, 1.76],
];

/// Performance per watt of the static peak-sized fleet.
pub const PPW_ALWAYSON: f64 = 1.7e-6;

/// Energy operating point, watt-hours.
pub const ENERGY_WH: f64 = 250.0;

/// Sleeping servers implied by the P_avg column increments.
pub const N_SLEEPING: usize = 10;

/// The zero-sleep-power column of [`PPW`]; anchors each row's latency.
pub const ANCHOR_PPW: [f64; 5] = [PPW[0][0], PPW[1][0], PPW[2][0], PPW[3][0], PPW[4][0]];

/// Cells of [`P_AVG_W`] whose printed values look swapped: the 17- and
/// 18-minute zero-sleep-power entries.
pub const TRANSPOSED_P_AVG: [(usize, usize); 2] = [(2, 0), (3, 0)];
