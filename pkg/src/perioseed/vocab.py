"""Closed label vocabularies for periodontitis Stage / Grade / Extent.

Canonical forms follow the 2018 AAP/EFP classification: stages I-IV,
grades A-C, extent localized/generalized (the molar/incisor pattern is
out of scope). Surface forms are what generation may legitimately emit
before normalization.
"""

from __future__ import annotations

# Canonical (post-normalization) values.
STAGES = ("I", "II", "III", "IV")
GRADES = ("A", "B", "C")
EXTENTS = ("localized", "generalized")

# Surface tokens the reference extractor and the noise model draw from.
STAGE_TOKENS = ("i", "ii", "iii", "iv", "1", "2", "3", "4")
GRADE_TOKENS = ("a", "b", "c")
EXTENT_TOKENS = ("localized", "generalized")

STAGE_MAP = {
    "1": "I",
    "i": "I",
    "2": "II",
    "ii": "II",
    "3": "III",
    "iii": "III",
    "4": "IV",
    "iv": "IV",
}

CATEGORIES = ("stage", "grade", "extent")

SURFACE_TOKENS = {
    "stage": STAGE_TOKENS,
    "grade": GRADE_TOKENS,
    "extent": EXTENT_TOKENS,
}
