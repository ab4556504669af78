"""Detect anti-dumping circumvention by re-routing through third countries.

Monthly per-product trade networks are summarized into a two-hop
circumvention index for each (product, exporter, importer) route; a level
shift of that index during the duty window is tested with a fixed-effects
panel regression against unrelated control products.
"""

__version__ = "0.1.0"

from .controls import ControlPanel, missing_fraction, select_controls
from .detect import DetectionFlag, FEFit, Panel, PanelObservation, Spec, build_panel, detect, fit_fixed_effects
from .evaluate import ConfusionMatrix, confusion_matrix, detection_rate
from .graph import EdgeWeight, TradeNetwork, build_network, iter_networks, network_stats, out_neighbors
from .index import (
    CircumventionSeries,
    PathStatistic,
    circumvention_index,
    index_series,
    route_series,
    standardize_series,
    two_hop_value,
)
from .ingest import (
    EuMembership,
    FlowObservation,
    FlowType,
    Provenance,
    TradeRecord,
    aggregate_eu,
    harmonize,
    harmonize_flow_types,
    mirror_average,
    parse_trade_records,
)
from .periods import YearMonth
from .registry import AdRegistry, DutyWindow, InvestigationLabel, duty_dummy, is_ad_free, load_registry
from .table import FlowTable
