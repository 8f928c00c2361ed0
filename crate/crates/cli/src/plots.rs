//! Generates matplotlib scripts that plot a finished run.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::output::{self, io_error};

pub const PLOT_DIR: &str = "plots";

struct Script {
    file: &'static str,
    data: &'static str,
    columns: &'static [&'static str],
    body: &'static str,
}

const PREAMBLE: &str = r#"#!/usr/bin/env python3
import sys
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
RUN = HERE.parent


def load(name):
    return np.genfromtxt(RUN / name, delimiter=",", names=True)


def grid(rows, column):
    # centerline rows are (t, node) pairs with a fixed node count per output
    t = np.unique(rows["t"])
    nodes = int(rows["node"].max()) + 1
    s = rows["s"][:nodes]
    return t, s, rows[column].reshape(len(t), nodes)


def smooth(t, y, degree=5):
    ok = np.isfinite(y)
    if ok.sum() <= degree:
        return None
    fit = np.polynomial.Polynomial.fit(t[ok], y[ok], degree)
    return fit(t)


def save(fig, stem):
    out = HERE / f"{stem}.png"
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)

"#;

const DYNAMIC: [Script; 6] = [
    Script {
        file: "curvature_heatmap.py",
        data: output::CENTERLINE,
        columns: &["t", "node", "s", "kappa1", "kappa2"],
        body: r#"rows = load("centerline.csv")
t, s, k1 = grid(rows, "kappa1")
_, _, k2 = grid(rows, "kappa2")
curvature = np.hypot(k1, k2)
fig, ax = plt.subplots(figsize=(7, 4))
mesh = ax.pcolormesh(t, s, curvature.T, shading="auto", cmap="viridis")
fig.colorbar(mesh, ax=ax, label="bending curvature (1/m)")
ax.set_xlabel("t (s)")
ax.set_ylabel("s (m)")
save(fig, "curvature_heatmap")
"#,
    },
    Script {
        file: "inflation_heatmap.py",
        data: output::CENTERLINE,
        columns: &["t", "node", "s", "rho"],
        body: r#"rows = load("centerline.csv")
t, s, rho = grid(rows, "rho")
fig, ax = plt.subplots(figsize=(7, 4))
span = max(abs(rho.min() - 1.0), abs(rho.max() - 1.0), 1e-12)
mesh = ax.pcolormesh(t, s, rho.T, shading="auto", cmap="coolwarm", vmin=1.0 - span, vmax=1.0 + span)
fig.colorbar(mesh, ax=ax, label="inflation ratio")
ax.set_xlabel("t (s)")
ax.set_ylabel("s (m)")
save(fig, "inflation_heatmap")
"#,
    },
    Script {
        file: "arm_length.py",
        data: output::TIMESERIES,
        columns: &["t", "length"],
        body: r#"rows = load("timeseries.csv")
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(rows["t"], 100 * rows["length"], ".", ms=3, label="simulated")
fit = smooth(rows["t"], rows["length"])
if fit is not None:
    ax.plot(rows["t"], 100 * fit, "-", label="5th-order fit")
ax.set_xlabel("t (s)")
ax.set_ylabel("arm length (cm)")
ax.legend()
save(fig, "arm_length")
"#,
    },
    Script {
        file: "bend_trajectory.py",
        data: output::TIMESERIES,
        columns: &["t", "bend_x", "bend_y", "bend_z"],
        body: r#"rows = load("timeseries.csv")
ok = np.isfinite(rows["bend_x"])
if not ok.any():
    sys.exit("no bend point was found in this run")
t = rows["t"][ok]
xyz = np.vstack([rows["bend_x"][ok], rows["bend_y"][ok], rows["bend_z"][ok]])
# plot in the two coordinates that move the most
a, b = np.argsort(np.ptp(xyz, axis=1))[::-1][:2]
names = "xyz"
fig, ax = plt.subplots(figsize=(5, 5))
sc = ax.scatter(100 * xyz[a], 100 * xyz[b], c=t, s=6, cmap="plasma")
fa, fb = smooth(t, xyz[a]), smooth(t, xyz[b])
if fa is not None:
    ax.plot(100 * fa, 100 * fb, "k-", lw=1, label="5th-order fit")
    ax.legend()
fig.colorbar(sc, ax=ax, label="t (s)")
ax.set_xlabel(f"{names[a]} (cm)")
ax.set_ylabel(f"{names[b]} (cm)")
ax.set_aspect("equal", adjustable="datalim")
save(fig, "bend_trajectory")
"#,
    },
    Script {
        file: "bend_velocity.py",
        data: output::TIMESERIES,
        columns: &["t", "bend_speed"],
        body: r#"rows = load("timeseries.csv")
ok = np.isfinite(rows["bend_speed"])
t, v = rows["t"][ok], rows["bend_speed"][ok]
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(t, 100 * v, ".", ms=3, label="simulated")
fit = smooth(t, v)
if fit is not None:
    ax.plot(t, 100 * fit, "-", label="5th-order fit")
ax.set_xlabel("t (s)")
ax.set_ylabel("bend point speed (cm/s)")
ax.legend()
save(fig, "bend_velocity")
"#,
    },
    Script {
        file: "volume_change.py",
        data: output::TIMESERIES,
        columns: &["t", "delta_volume"],
        body: r#"rows = load("timeseries.csv")
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(rows["t"], 100 * rows["delta_volume"])
ax.axhline(0.0, color="k", lw=0.5)
ax.set_xlabel("t (s)")
ax.set_ylabel("volume change (%)")
save(fig, "volume_change")
"#,
    },
];

const STIFFNESS: Script = Script {
    file: "stiffness_contour.py",
    data: output::STIFFNESS_GRID,
    columns: &["force", "pressure", "delta_length", "stiffness"],
    body: r#"rows = load("stiffness_grid.csv")
forces = np.unique(rows["force"])
pressures = np.unique(rows["pressure"])
shape = (len(forces), len(pressures))
order = np.lexsort((rows["pressure"], rows["force"]))
dl = rows["delta_length"][order].reshape(shape)
k = rows["stiffness"][order].reshape(shape)
fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4.5))
F, P = np.meshgrid(forces, pressures, indexing="ij")
levels = left.contourf(100 * dl, F, P / 1000.0, levels=20, cmap="viridis")
fig.colorbar(levels, ax=left, label="transversal load (kPa)")
left.set_xlabel("shortening (cm)")
left.set_ylabel("axial compression (N)")
finite = np.where(np.isfinite(k), k, np.nan)
mesh = right.pcolormesh(
    pressures / 1000.0, forces, finite, shading="auto", cmap="magma", norm=matplotlib.colors.LogNorm()
)
fig.colorbar(mesh, ax=right, label="K = F/ΔL (N/m); blank where rigid or unloaded")
right.set_xlabel("transversal load (kPa)")
right.set_ylabel("axial compression (N)")
save(fig, "stiffness_contour")
"#,
};

fn header(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Plot(format!("cannot read {}: {e}", path.display())))?;
    let h = reader
        .headers()
        .map_err(|e| CliError::Plot(format!("cannot read header of {}: {e}", path.display())))?;
    Ok(h.iter().map(str::to_string).collect())
}

/// Writes plot scripts for the run in `run_dir` into `run_dir/plots` and
/// returns their paths. Every column a script reads must be present.
pub fn emit_plots(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let has = |name: &str| run_dir.join(name).is_file();
    let scripts: Vec<&Script> = if has(output::STIFFNESS_GRID) {
        vec![&STIFFNESS]
    } else if has(output::TIMESERIES) {
        DYNAMIC.iter().collect()
    } else {
        return Err(CliError::Plot(format!(
            "{} holds no run outputs ({} or {})",
            run_dir.display(),
            output::TIMESERIES,
            output::STIFFNESS_GRID
        )));
    };

    let mut missing = Vec::new();
    for script in &scripts {
        let data = run_dir.join(script.data);
        if !data.is_file() {
            missing.push(format!("{} needs {}, which is missing", script.file, script.data));
            continue;
        }
        let columns = header(&data)?;
        for c in script.columns {
            if !columns.iter().any(|h| h == c) {
                missing.push(format!("{} needs column '{c}' in {}", script.file, script.data));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Plot(missing.join("\n")));
    }

    let dir = run_dir.join(PLOT_DIR);
    std::fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let mut written = Vec::new();
    for script in scripts {
        let path = dir.join(script.file);
        std::fs::write(&path, format!("{PREAMBLE}\n{}", script.body)).map_err(io_error(&path))?;
        written.push(path);
    }
    Ok(written)
}
