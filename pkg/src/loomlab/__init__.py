"""loomlab: horocyclic and geodesic dynamics on loom surfaces."""

__version__ = "0.1.0"

from .hyperbolic import (  # noqa: F401
    INF,
    BandPoint,
    ChartPoint,
    GeodesicLine,
    Horocycle,
    Isometry,
    LoomlabError,
    band_to_chart,
    chart_to_band,
    dist,
    dist_geodesics,
    nau_decompose,
    perpendicular_boundary_geodesic,
    reflect,
)
from .intervalsets import (  # noqa: F401
    DimensionEstimate,
    IntervalSet,
    box_dimension,
    cantor_cover,
    delta_sets,
    minkowski_sum,
    sumset,
)
from .measure import (  # noqa: F401
    EmpiricalMeasure,
    SectionSpec,
    check_flow_invariance,
    check_restriction,
    check_tightness,
    choose_section,
    estimate_nu,
    section_membership,
)
from .recurrence import RecurrenceReport, recurrence_by_slack  # noqa: F401
from .surface import (  # noqa: F401
    HalfPlaneSpec,
    LoomSurfaceSpec,
    SurfacePoint,
    design_from_E,
    design_heights,
    design_summable,
    load_spec,
    save_spec,
    sheet_distance,
    tau,
    validate,
)
from .tracer import (  # noqa: F401
    SlackValue,
    SurfaceTangent,
    Trajectory,
    busemann,
    crossing_sequence,
    flow,
    slack,
    trace_geodesic,
    trace_horocycle,
    x_tangent,
)
from .weaving import (  # noqa: F401
    CrossingGeodesic,
    WeavingGeodesic,
    WeavingPattern,
    build_crossing,
    build_weaving,
    crossing_slack,
    pulled_tight_slack,
    trace_crossing,
    verify_chain_slack,
    verify_weaving_additivity,
    verify_weaving_lemma,
)
