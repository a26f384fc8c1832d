from .dust import DustReport, asymptotic_lower_bound, dust_solution
from .marking import (
    Marking,
    UpsilonBank,
    eternal_branch_mark,
    eternal_jump_times,
    maximal_marking_upsilon,
)
from .picard import PicardResult, picard_mkv
from .point_process import CppSample, sample_cpp, scale_cpp

__all__ = [
    "CppSample",
    "DustReport",
    "Marking",
    "PicardResult",
    "UpsilonBank",
    "asymptotic_lower_bound",
    "dust_solution",
    "eternal_branch_mark",
    "eternal_jump_times",
    "maximal_marking_upsilon",
    "picard_mkv",
    "sample_cpp",
    "scale_cpp",
]
