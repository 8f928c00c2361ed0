#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Short cantilever sagging under gravity; runs in well under a second.
pub const SMALL_DYNAMIC: &str = r#"
schema = 1
name = "small_sag"

[material]
youngs_modulus = 1.0e5
poisson = 0.4999
viscosity = 50.0
density = 1000.0

[geometry]
length = 0.2
base_radius = 0.01

[environment]
gravity = [-9.81, 0.0, 0.0]

[basis]
kappa2 = 2
nu3 = 1
rho_segments = 1
quadrature_intervals = 3
quadrature_points = 3

[[cables]]
name = "lm"
route = { kind = "radial", fraction = 0.5, angle_deg = 0.0 }
activation = { kind = "wave", magnitude = 0.05, position = { coeffs = [0.2, 4.0], max = 0.9 }, steepness = 40.0 }

[simulation]
mode = "dynamic"
duration = 0.05
output_interval = 0.01
"#;

pub fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cosserat"))
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

pub fn simulate(config: &Path, out: &Path) -> Output {
    binary()
        .arg("simulate")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}
