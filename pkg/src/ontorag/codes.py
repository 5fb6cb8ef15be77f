"""Code string normalization and human display forms for ICD code systems."""

from __future__ import annotations


def normalize_code(code: str) -> str:
    """Uppercase and strip dots; idempotent."""
    return code.strip().upper().replace(".", "")


def icd9_display(code: str) -> str:
    """Re-dot a normalized ICD-9-CM code.

    Diagnosis and V codes take the dot after the 3rd character, E codes after
    the 4th; codes at or below the dot position stay unchanged.
    """
    if code.startswith("E"):
        if len(code) > 4:
            return code[:4] + "." + code[4:]
        return code
    if len(code) > 3:
        return code[:3] + "." + code[3:]
    return code


def icd10_display(code: str) -> str:
    """Re-dot a normalized ICD-10-CM code (dot after the 3rd character)."""
    if len(code) > 3:
        return code[:3] + "." + code[3:]
    return code


def display_code(scheme_id: str, code: str) -> str:
    """Human display form for a normalized code, by scheme convention."""
    if scheme_id.lower().startswith("icd9"):
        return icd9_display(code)
    return icd10_display(code)
