from .label_map import LabelMap, fit_label_map
from .concept_layout import ConceptLayout, expand_layout, resize_layout, resize_channels
from .netpbm import (
    load_label_map,
    save_label_map,
    load_image,
    save_image,
    read_netpbm,
    write_netpbm,
    encode_netpbm,
    decode_netpbm,
    to_pixels,
    from_pixels
)
