"""G-YOLOv11 / YOLOv11 graphs, inference, profiling and evaluation."""

from ._gyolo import (
    ArchError,
    BindError,
    DataError,
    LabelParseError,
    Model,
    ShapeError,
    WeightFormatError,
    comparison_json,
    count_flops,
    count_layers,
    count_params,
    default_class_names,
    evaluate,
    export_arch,
    gradcheck,
    gradcheck_targets,
    init_weights,
    iou,
    load_image,
    nms,
    parse_labels,
    summary_json,
    variant_name,
    weight_names,
)

FAMILIES = ("yolov11", "g-yolov11")
SCALES = ("n", "s", "m", "l", "x")

__version__ = "0.1.0"
