"""Readers and writers for experiment CSVs, weight documents, run configs and
result CSVs.

All text is UTF-8, comma separated, with ``.`` as the decimal point. Floats
are written with 17 significant digits so that a write/read cycle returns the
same doubles.
"""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from pathlib import Path

import numpy as np

from .discovery import Experiment, LossReport, RegMode, TrainConfig, GradientMode
from .energy_net import ENERGY_WEIGHT_NAMES, EnergyWeights
from .errors import ParseError
from .material_point import Constraint, LoadingProtocol, Trajectory
from .potential_net import POTENTIAL_WEIGHT_NAMES, ActivationMode, PotentialWeights

EXPERIMENT_COLUMNS = ("time_h", "C11", "C22", "C33", "S11", "S22", "S33", "mask1", "mask2", "mask3")
TRAJECTORY_COLUMNS = (
    "time_h", "S11_pred", "S22_pred", "S33_pred", "gamma_hat", "phi_hat", "newton_iters", "det_Cg",
)
LOSS_COLUMNS = ("epoch", "total", "data", "penalty")
ALL_WEIGHT_NAMES = ENERGY_WEIGHT_NAMES + POTENTIAL_WEIGHT_NAMES

# Alternative spellings accepted when reading weight documents.
WEIGHT_ALIASES = {
    "wσ1": "ws1", "wσ2": "ws2", "wσ3": "ws3", "wσ4": "ws4",
    "wτ1": "wt1", "wτ2": "wt2", "wτ3": "wt3", "wτ4": "wt4",
    "wsABS": "ws1", "wσABS": "ws1", "wtABS": "wt1", "wτABS": "wt1",
    "ŵη": "weta", "ŵη": "weta", "wη": "weta", "w_eta": "weta", "eta": "weta",
}


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _float(text: str, path, line: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"column {column!r}: not a number: {text!r}", str(path), line) from None
    if not np.isfinite(value):
        raise ParseError(f"column {column!r}: non-finite value {text!r}", str(path), line)
    return value


# --- experiment files -------------------------------------------------------

def read_experiment(path, require_stresses: bool = True) -> Experiment:
    """Parse an experiment CSV into an :class:`Experiment`.

    Stress cells of zero-stress directions may be empty; with
    ``require_stresses=False`` every stress cell may be empty (read as 0).
    The mask must be the same on every row.

    Raises
    ------
    ParseError
        With the offending line number.
    """
    path = Path(path)
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", str(path), 1)
        header = [h.strip() for h in header]
        missing = [c for c in EXPERIMENT_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"missing columns {missing}", str(path), 1)
        col = {c: header.index(c) for c in EXPERIMENT_COLUMNS}
        times, cs, ss = [], [], []
        mask = None
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", str(path), line)
            cell = {c: row[i].strip() for c, i in col.items()}
            try:
                row_mask = tuple(Constraint(cell[f"mask{k}"].upper()) for k in (1, 2, 3))
            except ValueError:
                raise ParseError("mask entries must be M or Z", str(path), line) from None
            if mask is None:
                mask = row_mask
            elif row_mask != mask:
                raise ParseError("mask changes between rows", str(path), line)
            t = _float(cell["time_h"], path, line, "time_h")
            if times and t <= times[-1]:
                raise ParseError("times must be strictly increasing", str(path), line)
            c = [_float(cell[f"C{k}{k}"], path, line, f"C{k}{k}") for k in (1, 2, 3)]
            if min(c) <= 0.0:
                raise ParseError("C components must be > 0", str(path), line)
            s = []
            for k, m in zip((1, 2, 3), row_mask):
                name = f"S{k}{k}"
                if m is Constraint.MEASURED and (require_stresses or cell[name]):
                    s.append(_float(cell[name], path, line, name))
                else:
                    s.append(_float(cell[name], path, line, name) if cell[name] else 0.0)
            times.append(t)
            cs.append(c)
            ss.append(s)
    if not times:
        raise ParseError("no data rows", str(path), 2)
    if Constraint.MEASURED not in mask:
        raise ParseError("at least one direction must be M", str(path), 2)
    return Experiment(LoadingProtocol(np.array(times), np.array(cs), mask), np.array(ss))


def write_experiment(path, protocol: LoadingProtocol, stresses=None) -> None:
    """Write a protocol (and optionally stresses) in experiment format.

    Without ``stresses`` the stress cells are left empty, which is valid for
    ``simulate`` input but not for training.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXPERIMENT_COLUMNS)
        masks = [m.value for m in protocol.mask]
        for i, t in enumerate(protocol.times):
            s = ["", "", ""] if stresses is None else [fmt(v) for v in stresses[i]]
            w.writerow([fmt(t), *(fmt(c) for c in protocol.stretches[i]), *s, *masks])


def read_protocol(path) -> LoadingProtocol:
    """Read only the loading part of an experiment file (stress cells may be empty)."""
    return read_experiment(path, require_stresses=False).protocol


# --- weights ------------------------------------------------------------------

def write_weights(path, ew: EnergyWeights, pw: PotentialWeights) -> None:
    """JSON document with every weight at 17 significant digits."""
    values = dict(zip(ENERGY_WEIGHT_NAMES, ew.as_array()))
    values.update(zip(POTENTIAL_WEIGHT_NAMES, pw.as_array()))
    body = ",\n".join(f'    "{name}": {fmt(values[name])}' for name in ALL_WEIGHT_NAMES)
    text = (
        "{\n"
        f'  "activation_mode": "{pw.activation_mode.value}",\n'
        '  "weights": {\n'
        f"{body}\n"
        "  }\n"
        "}\n"
    )
    Path(path).write_text(text, encoding="utf-8")


def weights_from_mapping(doc: dict, source: str = "<weights>"):
    if not isinstance(doc, dict) or not isinstance(doc.get("weights"), dict):
        raise ParseError('expected an object with a "weights" object', source)
    unknown_top = set(doc) - {"activation_mode", "weights"}
    if unknown_top:
        raise ParseError(f"unknown keys {sorted(unknown_top)}", source)
    raw = {}
    for key, value in doc["weights"].items():
        name = WEIGHT_ALIASES.get(key, key)
        if name not in ALL_WEIGHT_NAMES:
            raise ParseError(f"unknown weight {key!r}", source)
        if name in raw:
            raise ParseError(f"weight {name!r} given twice", source)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"weight {key!r} must be a number", source)
        raw[name] = float(value)
    missing = [n for n in ALL_WEIGHT_NAMES if n not in raw]
    if missing:
        raise ParseError(f"missing weights {missing}", source)
    try:
        mode = ActivationMode(doc.get("activation_mode", ActivationMode.NEG_MAX.value))
        ew = EnergyWeights(*(raw[n] for n in ENERGY_WEIGHT_NAMES))
        pw = PotentialWeights(*(raw[n] for n in POTENTIAL_WEIGHT_NAMES), activation_mode=mode)
    except ValueError as exc:
        raise ParseError(str(exc), source) from None
    return ew, pw


def read_weights(path):
    """Load ``(EnergyWeights, PotentialWeights)`` from a weights document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno) from None
    return weights_from_mapping(doc, str(path))


# --- run config -------------------------------------------------------------

CONFIG_KEYS = (
    "epochs", "learning_rate", "reg_mode", "reg_strength", "eta_reg", "seed", "eps",
    "gradient_mode", "activation_mode", "dt_policy",
)


def read_config(path) -> TrainConfig:
    """Parse a JSON run config; unknown keys are rejected.

    ``dt_policy`` accepts only ``"data"``: steps follow the time grid of the
    experiment files.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object", str(path))
    unknown = sorted(set(doc) - set(CONFIG_KEYS))
    if unknown:
        raise ParseError(f"unknown config keys {unknown}", str(path))
    doc = dict(doc)
    if doc.pop("dt_policy", "data") != "data":
        raise ParseError('dt_policy must be "data"', str(path))
    known = {f.name for f in fields(TrainConfig)}
    try:
        return TrainConfig(**{k: v for k, v in doc.items() if k in known})
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), str(path)) from None


def config_to_mapping(cfg: TrainConfig) -> dict:
    return {
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "reg_mode": RegMode(cfg.reg_mode).value,
        "reg_strength": cfg.reg_strength,
        "eta_reg": cfg.eta_reg,
        "seed": cfg.seed,
        "eps": cfg.eps,
        "gradient_mode": GradientMode(cfg.gradient_mode).value,
        "activation_mode": ActivationMode(cfg.activation_mode).value,
        "dt_policy": "data",
    }


# --- results ----------------------------------------------------------------

def write_trajectory(path, traj: Trajectory) -> None:
    s = traj.stresses
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for i, t in enumerate(traj.times):
            r = traj.results[i]
            w.writerow([
                fmt(t), fmt(s[i, 0]), fmt(s[i, 1]), fmt(s[i, 2]), fmt(r.gamma_hat),
                fmt(r.phi_hat_value), str(r.newton_iters), fmt(traj.det_cg[i]),
            ])


def read_trajectory(path) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV keyed by header name."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_COLUMNS:
            raise ParseError(f"header must be {','.join(TRAJECTORY_COLUMNS)}", str(path), 1)
        rows = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(TRAJECTORY_COLUMNS):
                raise ParseError("wrong number of fields", str(path), line)
            rows.append([_float(v, path, line, c) for v, c in zip(row, TRAJECTORY_COLUMNS)])
    data = np.array(rows, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))
    out = {c: data[:, i] for i, c in enumerate(TRAJECTORY_COLUMNS)}
    out["newton_iters"] = out["newton_iters"].astype(int)
    return out


def write_loss(path, report: LossReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOSS_COLUMNS)
        for epoch, total, data, pen in report.as_array():
            w.writerow([str(int(epoch)), fmt(total), fmt(data), fmt(pen)])
