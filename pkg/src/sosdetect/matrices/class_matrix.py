# sosdetect/matrices/class_matrix.py
# !/usr/bin/env python3

from typing import List, Tuple

SHAPES = ("disk", "square", "triangle", "diamond", "ring")


def get_class_matrix() -> List[Tuple[str, Tuple[int, int, int]]]:
    """Returns the (shape, RGB colour) table for synthetic sign classes."""
    class_matrix_references = [
        # Base set, one shape per class
        ("disk", (220, 30, 30)),
        ("square", (30, 90, 220)),
        ("triangle", (240, 200, 20)),
        ("diamond", (30, 170, 60)),
        ("ring", (200, 40, 200)),
        # Extended set, shapes repeated with new colours
        ("disk", (20, 200, 210)),
        ("square", (250, 130, 20)),
        ("triangle", (130, 60, 20)),
        ("diamond", (250, 250, 250)),
        ("ring", (10, 10, 10)),
    ]
    return class_matrix_references


_class_matrix = get_class_matrix()

MAX_CLASSES = len(_class_matrix)


def get_class_style(class_id: int) -> Tuple[str, Tuple[int, int, int]]:
    """
    Looks up the shape and colour of a class.
    """
    if not 0 <= class_id < MAX_CLASSES:
        raise ValueError(f"class_id must lie in [0, {MAX_CLASSES}), got {class_id}")
    return _class_matrix[class_id]
