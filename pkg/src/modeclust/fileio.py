"""Text formats: mixture specs, datasets, flat configs, and result CSVs.

Mixture spec (one ``key = value`` per line; bare whitespace also accepted)::

    dim = 2
    components = 2
    weight_1 = 0.5
    mean_1 = -2.5,0.0
    cov_1 = 1.0,0.0,0.0,1.0
    ...

Datasets are one point per line, comma-separated, no header. ``results.csv``
carries only deterministic columns; wall-clock timings go to ``timings.csv``
so reruns with the same seed stay byte-identical.
"""

from __future__ import annotations

import numpy as np

from .density import GaussianMixture


class ParseError(ValueError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def _key_value_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, value = line.partition("=")
            else:
                key, _, value = line.partition(" ")
            key, value = key.strip(), value.strip()
            if not key or not value:
                raise ParseError(path, line_no, f"expected 'key = value', got {raw.strip()!r}")
            yield line_no, key, value


def read_config(path):
    """Flat key = value file -> dict of strings (typed later by the consumer)."""
    out = {}
    for line_no, key, value in _key_value_lines(path):
        if key in out:
            raise ParseError(path, line_no, f"duplicate key {key!r}")
        out[key] = value
    return out


def read_mixture_spec(path):
    entries = read_config(path)

    def grab(key, line_hint=0):
        if key not in entries:
            raise ParseError(path, line_hint, f"missing key {key!r}")
        return entries[key]

    try:
        dim = int(grab("dim"))
        k = int(grab("components"))
    except ValueError as exc:
        raise ParseError(path, 0, str(exc))
    weights, means, covs = [], [], []
    for j in range(1, k + 1):
        try:
            weights.append(float(grab(f"weight_{j}")))
            mean = np.array([float(v) for v in grab(f"mean_{j}").split(",")])
            cov = np.array([float(v) for v in grab(f"cov_{j}").split(",")])
        except ValueError as exc:
            raise ParseError(path, 0, f"component {j}: {exc}")
        if mean.size != dim:
            raise ParseError(path, 0, f"mean_{j} has {mean.size} coordinates, expected {dim}")
        if cov.size != dim * dim:
            raise ParseError(path, 0, f"cov_{j} has {cov.size} entries, expected {dim * dim}")
        means.append(mean)
        covs.append(cov.reshape(dim, dim))
    try:
        return GaussianMixture(weights, np.stack(means), np.stack(covs))
    except ValueError as exc:
        raise ParseError(path, 0, str(exc))


def write_mixture_spec(gm, path):
    lines = [f"dim = {gm.dim}", f"components = {gm.n_components}"]
    for j in range(gm.n_components):
        lines.append(f"weight_{j + 1} = {fmt(gm.weights[j])}")
        lines.append(f"mean_{j + 1} = " + ",".join(fmt(v) for v in gm.means[j]))
        lines.append(f"cov_{j + 1} = " + ",".join(fmt(v) for v in gm.covariances[j].ravel()))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset(path):
    """One point per line, comma-separated reals, no header."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split(",")]
            except ValueError:
                raise ParseError(path, line_no, f"not a comma-separated point: {line!r}")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(path, line_no,
                                 f"point has {len(row)} coordinates, expected {width}")
            rows.append(row)
    if not rows:
        raise ParseError(path, 0, "dataset is empty")
    return np.asarray(rows, dtype=float)


def write_dataset(points, path):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        for row in points:
            fh.write(",".join(fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# CSV emission (deterministic formatting)
# ---------------------------------------------------------------------------

def fmt(value):
    """Stable scalar formatting: shortest round-trip for floats, '' for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v != v:
            return "nan"
        return repr(v)
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


RESULTS_HEADER = ["experiment", "dim", "n", "h", "separation", "replications",
                  "mean_loss", "stderr_loss", "core_loss", "core_fraction",
                  "excluded", "flagged", "tv_distance"]


def write_results_csv(path, experiment, dim, rows):
    """rows: SweepRow-like records; tv_distance applies to single-run reports."""
    out = []
    for r in rows:
        out.append([experiment, dim, r.n, r.h, r.separation, r.replications,
                    r.mean_loss, r.stderr, r.core_loss, r.core_fraction,
                    r.excluded, r.flagged, getattr(r, "tv_distance", None)])
    write_csv(path, RESULTS_HEADER, out)


def write_timings_csv(path, rows):
    out = [[r.n, r.h, r.separation, f"{r.runtime_seconds:.3f}"] for r in rows]
    write_csv(path, ["n", "h", "separation", "runtime_seconds"], out)


def write_modes_csv(path, locations, densities):
    locations = np.atleast_2d(locations)
    rows = []
    for j in range(locations.shape[0]):
        rows.append([j, densities[j]] + [v for v in locations[j]])
    coords = [f"x{i}" for i in range(locations.shape[1] if locations.size else 0)]
    write_csv(path, ["mode", "density"] + coords, rows)


def write_labels_csv(path, labels, converged=None):
    rows = []
    for i, lab in enumerate(labels):
        row = [i, int(lab)]
        if converged is not None:
            row.append(bool(converged[i]))
        rows.append(row)
    header = ["point", "label"] + (["converged"] if converged is not None else [])
    write_csv(path, header, rows)


def write_checks_csv(path, named_results):
    """named_results: iterable of (check_name, BoundCheckResult)."""
    rows = []
    for name, res in named_results:
        if res.precondition_failed:
            rows.append([name, "preconditions", None, None, 0, "precondition-failed"])
            continue
        for case in res.details:
            rows.append([name, case.case_id, case.lhs, case.rhs,
                         case.violated, "violated" if case.violated else "ok"])
    write_csv(path, ["check", "case", "lhs", "rhs", "violation", "status"], rows)


def write_critical_point_report(path, critical_points):
    """One line per point: kind, morse index, density value, coordinates."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in critical_points:
            coords = ",".join(fmt(v) for v in c.location)
            fh.write(f"{c.kind},{c.morse_index},{fmt(c.value)},{coords}\n")
