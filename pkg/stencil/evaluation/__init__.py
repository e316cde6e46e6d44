from .segmentation import oracle_segment
from .metrics import ConfusionAccumulator, RegionStats, miou, pixel_acc, region_stats, diversity
from .report import EvalReport, validate_report
