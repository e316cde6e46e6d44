from .scores import AttentionParams, ScoreMaps, attention_scores, rectify
from .overrides import Share, Swap, AttentionOverride, apply_overrides, parse_overrides
from .layer import AttentionTrace, attend, cross_attention, rectified_cross_attention
from .probe import AttentionEvent, AttentionProbe, CompositeProbe, MaskGuard, AttentionCapture
