from .grouping import StaticGrouping
from .sweeper import Sweeper, run_sweeper
