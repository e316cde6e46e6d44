from .palette import (
    SHAPES,
    COLORS,
    BACKGROUND,
    PALETTE,
    ALL_COMBOS,
    OBJECT_CLASSES,
    class_id,
    combo_of,
    concept,
    palette_array,
    parse_combos
)
from .generator import SceneConfig, SceneObject, SceneSpec, gen_scene, render, render_labels, caption
from .manifest import (
    SPLITS,
    DEFAULT_FRACTIONS,
    Record,
    DatasetManifest,
    assign_split,
    generate_dataset,
    holdout_filter,
    census
)
