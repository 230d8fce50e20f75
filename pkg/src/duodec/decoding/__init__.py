from .search import (BeamConfig, JointHypothesis, ModelScorer, SearchResult, TraceWriter, decode_multilingual,
                     final_score, greedy_decode, joint_beam_search)
from ..model.dual_decoder import schedule

__all__ = ["BeamConfig", "JointHypothesis", "ModelScorer", "SearchResult", "TraceWriter", "decode_multilingual",
           "final_score", "greedy_decode", "joint_beam_search", "schedule"]
