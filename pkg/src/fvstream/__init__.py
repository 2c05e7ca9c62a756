"""Desk-scale simulator for loss-resilient streaming of stereo texture+depth
video with free-viewpoint synthesis at the receiver.

The encoder picks a reference picture per macroblock against the expected
synthesized-view distortion, the channel drops packets with delayed
feedback, the decoder conceals and tracks errors, and the renderer blends
the two decoded views into a virtual middle view, optionally weighting by
tracked reliability.
"""

from .frames import (FramePlane, ViewFrame, QualityReport, mean_abs_error,
                     mse, psnr, load_pgm, save_pgm, load_plane, save_plane)
from .scenegen import (SyntheticSceneSpec, TextureSpec, ObjectSpec,
                       default_scene_spec, generate_synthetic_stereo,
                       load_scene_spec, scene_from_dict)
from .channel import (Component, PacketId, LossTrace, FeedbackState,
                      build_schedule, packetize, make_iid_trace, feedback_at,
                      lost_mb_mask, save_trace, load_trace)
from .codec import (CodecConfig, BlockDecision, EncodedPlane, CandidateSet,
                    build_inter_candidates, candidate_search, decode_plane,
                    serialize_stream, parse_stream)
from .errortrack import (ExpectedErrorTracker, DecoderTracker, block_footprint,
                         innovation_term)
from .synthesis import (SynthesisParams, SynthesisResult, WarpedView,
                        warp_view, blend_standard, blend_adaptive,
                        reliability_weights, synthesize_view,
                        correspondence_sets)
from .sensitivity import (SensitivityParams, curvature_map, block_profile,
                          g_eval)
from .optimizer import (OPTIMIZER_MODES, PlaneCandidates, PlaneSelection,
                        ReactiveTaint, build_plane_candidates, select_plane,
                        tune_lambda, tune_to_band)
from .pipeline import (ExperimentConfig, ExperimentReport, CellResult,
                       config_from_dict, run_experiment, compare_setups,
                       emit_plot_data, encode_stream, decode_stream,
                       synthesize_sequence, SETUPS)

__version__ = "0.1.0"

__all__ = [
    "FramePlane", "ViewFrame", "QualityReport", "mean_abs_error", "mse",
    "psnr", "load_pgm", "save_pgm", "load_plane", "save_plane",
    "SyntheticSceneSpec", "TextureSpec", "ObjectSpec", "default_scene_spec",
    "generate_synthetic_stereo", "load_scene_spec", "scene_from_dict",
    "Component", "PacketId", "LossTrace", "FeedbackState", "build_schedule",
    "packetize", "make_iid_trace", "feedback_at", "lost_mb_mask",
    "save_trace", "load_trace",
    "CodecConfig", "BlockDecision", "EncodedPlane", "CandidateSet",
    "build_inter_candidates", "candidate_search", "decode_plane",
    "serialize_stream", "parse_stream",
    "ExpectedErrorTracker", "DecoderTracker", "block_footprint",
    "innovation_term",
    "SynthesisParams", "SynthesisResult", "WarpedView", "warp_view",
    "blend_standard", "blend_adaptive", "reliability_weights",
    "synthesize_view", "correspondence_sets",
    "SensitivityParams", "curvature_map", "block_profile", "g_eval",
    "OPTIMIZER_MODES", "PlaneCandidates", "PlaneSelection", "ReactiveTaint",
    "build_plane_candidates", "select_plane", "tune_lambda", "tune_to_band",
    "ExperimentConfig", "ExperimentReport", "CellResult", "config_from_dict",
    "run_experiment", "compare_setups", "emit_plot_data", "encode_stream",
    "decode_stream", "synthesize_sequence", "SETUPS",
]
