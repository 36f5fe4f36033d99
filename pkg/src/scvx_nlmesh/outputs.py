"""Result files: trajectory/iteration tables, run summaries and plot data.

Every CSV starts with a header naming each column and its unit. Floats are
written with ``repr`` so identical runs give byte-identical files.
"""

import csv
import json
import os

import numpy as np

from .discretization import propagate_nonlinear
from .errors import PropagationError
from .scvx import IterationRecord
from .subproblem import node_segments

TRAJECTORY_FILE = "trajectory.csv"
ITERATIONS_FILE = "iterations.csv"
SUMMARY_FILE = "summary.json"
CONFIG_FILE = "config.yaml"
PLOT_FILES = ("cost_history.csv", "trajectory3d.csv", "thrust.csv", "mass.csv")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def thrust_newtons(problem, thrust, z, s_nodes):
    """Physical thrust magnitude per node from the acceleration-thrust ``T s / m``."""
    mag = np.linalg.norm(thrust, axis=1)
    m_norm = np.exp(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_norm = np.where(s_nodes > 0.0, mag * m_norm / s_nodes, 0.0)
    return problem.units.thrust_to_newtons(t_norm)


def count_switches(thrust_n, tmax_n):
    """Crossings of ``tmax/2`` along the node sequence."""
    above = np.asarray(thrust_n) > 0.5 * tmax_n
    return int(np.count_nonzero(above[1:] != above[:-1]))


def verification_states(model, ref):
    """Propagate the nonlinear dynamics from the first node under the control only."""
    K = ref.K
    dtau = 1.0 / (K - 1)
    out = np.empty_like(ref.x)
    out[0] = ref.x[0]
    x = ref.x[0]
    for k in range(K - 1):
        try:
            x = propagate_nonlinear(model, x, ref.thrust[k], ref.thrust[k + 1], ref.s[k], dtau)
        except PropagationError:
            out[k + 1:] = np.nan
            break
        out[k + 1] = x
    return out


def _state_labels(model_name):
    if model_name == "cr3bp":
        return ["x [LU]", "y [LU]", "z [LU]", "vx [LU/TU]", "vy [LU/TU]", "vz [LU/TU]"]
    return ["p [LU]", "f [-]", "g [-]", "h [-]", "k [-]", "L [rad]"]


def write_trajectory(path, problem, ref):
    K = ref.K
    tau = np.linspace(0.0, 1.0, K)
    s_nodes = ref.s[node_segments(K)]
    t_n = thrust_newtons(problem, ref.thrust, ref.z, s_nodes)
    mass = problem.mass_kg(ref.z)
    header = (["node [-]", "tau [-]"] + _state_labels(problem.model)
              + ["Tx [nd]", "Ty [nd]", "Tz [nd]", "thrust [N]", "mass [kg]", "s [TU]"])
    rows = ([k, tau[k], *ref.x[k], *ref.thrust[k], t_n[k], mass[k], s_nodes[k]]
            for k in range(K))
    _write_csv(path, header, rows)


def write_iterations(path, history):
    _write_csv(path, IterationRecord.csv_header(), (r.csv_row() for r in history))


def run_summary(problem, result, config=None):
    ref = result.reference
    s_nodes = ref.s[node_segments(ref.K)]
    t_n = thrust_newtons(problem, ref.thrust, ref.z, s_nodes)
    defects = result.final_defects
    out = {
        "name": problem.name,
        "model": problem.model,
        "nodes": int(ref.K),
        "converged": bool(result.converged),
        "message": result.message,
        "iterations": result.iterations,
        "accepted_iterations": result.accepted_iterations,
        "initial_mass_kg": problem.m0_kg,
        "final_mass_kg": result.final_mass_kg,
        "propellant_kg": problem.m0_kg - result.final_mass_kg,
        "max_defect": float(np.max(defects)) if defects is not None else None,
        "max_thrust_n": float(np.max(t_n)),
        "switches": count_switches(t_n, problem.tmax_newtons),
        "wall_time_s": result.wall_time,
    }
    if config is not None:
        sc = config.data["scvx"]
        out.update(mesh=sc["mesh"], nl_index=bool(sc["nl_index"] in (True, "on")),
                   seed=config.seed)
    return out


def write_run(out_dir, problem, result, config=None):
    """Write trajectory, iterations, summary (and the resolved config) to ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    write_trajectory(os.path.join(out_dir, TRAJECTORY_FILE), problem, result.reference)
    write_iterations(os.path.join(out_dir, ITERATIONS_FILE), result.history)
    summary = run_summary(problem, result, config)
    with open(os.path.join(out_dir, SUMMARY_FILE), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if config is not None:
        from .config import serialize
        with open(os.path.join(out_dir, CONFIG_FILE), "w") as fh:
            fh.write(serialize(config))
    return summary


def _load_reference(run_dir, problem):
    from .discretization import ReferenceTrajectory
    path = os.path.join(run_dir, TRAJECTORY_FILE)
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path}: missing trajectory file")
    _, rows = _read_csv(path)
    arr = np.array([[float(v) for v in r] for r in rows])
    x, thrust, mass = arr[:, 2:8], arr[:, 8:11], arr[:, 12]
    s = arr[:-1, 13]
    z = np.log(mass / problem.units.mass_kg)
    # thrust bound is not stored; the norm is its tight value
    return ReferenceTrajectory(x, thrust, np.linalg.norm(thrust, axis=1), z, s), arr


def emit_plotdata(run_dir, problem, out_dir=None):
    """Write the four plot-data tables for a finished run; returns their paths."""
    out_dir = out_dir or run_dir
    it_path = os.path.join(run_dir, ITERATIONS_FILE)
    if not os.path.exists(it_path):
        raise FileNotFoundError(f"{it_path}: missing iterations file")
    ref, arr = _load_reference(run_dir, problem)
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, name) for name in PLOT_FILES]

    header, rows = _read_csv(it_path)
    col = {h.split(" ")[0]: i for i, h in enumerate(header)}
    _write_csv(paths[0], ["iteration [-]", "L [nd]", "J [nd]", "accepted [bool]"],
               ([r[col["iteration"]], r[col["L"]], r[col["J_after"]], r[col["accepted"]]]
                for r in rows))

    model = problem.make_model()
    tau = arr[:, 1]
    opt = model.to_cartesian(ref.x)[:, :3]
    ver = model.to_cartesian(verification_states(model, ref))[:, :3]
    _write_csv(paths[1], ["tau [-]", "x [LU]", "y [LU]", "z [LU]",
                          "x_verify [LU]", "y_verify [LU]", "z_verify [LU]"],
               ([tau[k], *opt[k], *ver[k]] for k in range(ref.K)))
    _write_csv(paths[2], ["tau [-]", "thrust [N]", "tmax [N]"],
               ([tau[k], arr[k, 11], problem.tmax_newtons] for k in range(ref.K)))
    _write_csv(paths[3], ["tau [-]", "mass [kg]"], ([tau[k], arr[k, 12]] for k in range(ref.K)))
    return paths
