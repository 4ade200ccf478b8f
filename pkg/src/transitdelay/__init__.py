"""Public transit routing that stays exact under bounded delays."""

from .delays import DelayScenario, DelayStream, DelayUpdate, generate_delay_stream
from .mr import TimetableView, mr_query
from .shortcuts import Shortcut, ShortcutOptions, ShortcutSet, compute_shortcuts
from .tb import TBData, tb_query
from .timetable import Network, TripRecord, load_network, save_network
from .updates import QueryDataSnapshot, advanced_update, basic_update, build_snapshot

__all__ = [
    "DelayScenario", "DelayStream", "DelayUpdate", "generate_delay_stream",
    "TimetableView", "mr_query",
    "Shortcut", "ShortcutOptions", "ShortcutSet", "compute_shortcuts",
    "TBData", "tb_query",
    "Network", "TripRecord", "load_network", "save_network",
    "QueryDataSnapshot", "advanced_update", "basic_update", "build_snapshot",
]
