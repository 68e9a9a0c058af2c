"""orbitgauge: numerical laboratory for diagonal flows on spaces of lattices."""

__version__ = "0.1.0"

from .errors import AuditError, BudgetError, OrbitgaugeError, PreconditionError  # noqa: E402,F401


def __getattr__(name):
    # lazy re-exports of the most used entry points, keeping import light
    from importlib import import_module

    table = {
        "LatticeBasis": "lattice",
        "shortest_vector": "lattice",
        "reduce_shape_2d": "lattice",
        "sample_haar_2d": "lattice",
        "dist_proxy": "lattice",
        "FlowSpec": "flows",
        "horospherical_frame": "flows",
        "apply_flow": "flows",
        "TargetSet": "targets",
        "inner_core": "targets",
        "measure_of_target": "targets",
        "TessellationSpec": "tessellation",
        "count_intersecting_translates": "tessellation",
        "HeightFunctionSpec": "heights",
        "margulis_check": "heights",
        "box_count_dimension": "dimension",
    }
    if name in table:
        return getattr(import_module(f".{table[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
