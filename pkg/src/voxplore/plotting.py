"""PNG figures for a finished mission (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .voxel_map import VoxelState  # noqa: E402


def plot_map_and_trajectory(mission, path: str | Path) -> None:
    """Top-down occupancy projection with the driven trajectory and geofences."""
    vmap = mission.vmap
    occ = np.any(vmap.state == VoxelState.OCCUPIED, axis=2)
    free = np.any(vmap.state == VoxelState.FREE, axis=2)
    img = np.full(occ.shape, 0.5)
    img[free] = 1.0
    img[occ & ~free] = 0.0
    lo, hi = vmap.bounds.lo, vmap.bounds.hi

    fig, ax = plt.subplots(figsize=(8, 8 * (hi[1] - lo[1]) / max(hi[0] - lo[0], 1e-9) + 1))
    ax.imshow(img.T, origin="lower", cmap="gray", vmin=0, vmax=1,
              extent=(lo[0], hi[0], lo[1], hi[1]))
    xy = np.array([[r["x"], r["y"]] for r in mission.log.ticks])
    if len(xy):
        ax.plot(xy[:, 0], xy[:, 1], "-", color="tab:blue", lw=1, label="trajectory")
        ax.plot(*xy[0], "o", color="tab:green", label="start")
    ax.plot(mission.world.home[0], mission.world.home[1], "*", color="tab:red", ms=10,
            label="home")
    for f in vmap.geofences:
        ax.add_patch(plt.Rectangle((f.lo[0], f.lo[1]), f.hi[0] - f.lo[0], f.hi[1] - f.lo[1],
                                   color="tab:orange", alpha=0.5))
    for a in mission.world.artifacts:
        ax.plot(a.position[0], a.position[1], "x", color="tab:purple")
    for r in mission.log.reports:
        ax.plot(r["position"][0], r["position"][1], "+", ms=10,
                color="tab:green" if r["scored"] else "tab:red")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"{mission.world.name}: map and trajectory")
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_exploration_curve(mission, path: str | Path) -> None:
    """Known voxels and distance traveled over mission time."""
    t = np.array([r["t"] for r in mission.log.ticks])
    known = np.array([r["known_voxels"] for r in mission.log.ticks])
    dist = np.array([r["distance"] for r in mission.log.ticks])
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, known, color="tab:blue")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("known voxels", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(t, dist, color="tab:gray", ls="--")
    ax2.set_ylabel("distance traveled (m)", color="tab:gray")
    ax.axvline(mission.T, color="tab:red", lw=0.8)
    ax.set_title("exploration progress")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def write_figures(mission, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    paths = [out / "map_trajectory.png", out / "exploration.png"]
    plot_map_and_trajectory(mission, paths[0])
    plot_exploration_curve(mission, paths[1])
    return paths
