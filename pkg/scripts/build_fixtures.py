#!/usr/bin/env python3
"""Regenerate the bundled fixture pack under src/etp/fixtures/.

Everything here is deterministic: rerunning the script reproduces the same
bytes. Outputs:

  cards/*.json          28 named tool cards (pretty JSON)
  registry_112.json     full 112-card registry (canonical JSON array)
  trajectories/*.json   52 expert episodes + placeholder observation PNGs
  golden/*.frame        wire frames pinned for conformance tests
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from etp.canonical import canonical_dumps  # noqa: E402
from etp.cards import parse_card  # noqa: E402
from etp.execution import CountingClock, ExecutionEngine, InvokeRequest  # noqa: E402
from etp.registry import Registry  # noqa: E402
from etp.toolchain import derive_constraints  # noqa: E402
from etp.wire import frame_encode  # noqa: E402

FIXTURES = ROOT / "src" / "etp" / "fixtures"

# --------------------------------------------------------------------------
# schema shorthand

def S(**kw):
    return {"kind": "string", **kw}

def I(**kw):
    return {"kind": "integer", **kw}

def N(**kw):
    return {"kind": "number", **kw}

def B():
    return {"kind": "boolean"}

def E(*values):
    return {"kind": "enum", "values": sorted(values)}

def A(element, **kw):
    return {"kind": "array", "element": element, **kw}

def O(fields, required=None):
    return {
        "kind": "object",
        "fields": fields,
        "required": sorted(fields) if required is None else sorted(required),
    }

def IMG():
    return {"kind": "image_ref"}


def card(tool_id, name, description, group, subcategory, tags, applicability,
         input_schema, output_schema, require, add, mode,
         trigger=None, forbid=(), delete=(), cost=None):
    doc = {
        "tool_id": tool_id,
        "name": name,
        "description": description,
        "capability": {
            "group": group,
            "subcategory": subcategory,
            "tags": sorted(tags),
            "applicability": applicability,
        },
        "input_schema": input_schema,
        "output_schema": output_schema,
        "preconditions": {"require": sorted(require), "forbid": sorted(forbid)},
        "effects": {"add": sorted(add), "delete": sorted(delete)},
        "mode": mode,
        "trigger_condition": trigger,
    }
    if cost is not None:
        doc["cost_hint_ms"] = cost
    return doc


# --------------------------------------------------------------------------
# catalogue cards (transcribed rows T01-T22)

CATALOGUE = [
    card(
        "tool_query_3d_scene_graph", "query_3d_scene_graph",
        "Queries historical position and spatial relations of objects observed in a 3-D scene graph.",
        "cognition", "queryable memory",
        ["memory", "scene graph", "spatial relations", "object history"],
        "Use when the target is lost from the current view and its last observed location must be recalled.",
        O({"scene_graph": S(), "object_query": S(min=1), "relation_query": S()}),
        O({"memory_ref": S(), "candidates": A(S()), "location": S(),
           "neighbor_relations": A(S()), "confidence": N(min=0.0, max=1.0)}),
        ["scene_memory_available"], ["target_recalled"],
        "on_demand", "Target lost from current view", cost=25,
    ),
    card(
        "tool_stm", "STM",
        "Maintains a fixed-size space-time memory bank, reading and writing target features frame by frame to stay robust against long-term drift.",
        "cognition", "spatio-temporal state modeling",
        ["memory bank", "video", "feature anchor", "tracking"],
        "Use when the target is blurred and an early-frame feature anchor is needed.",
        O({"frame_features": S(), "memory_query": S()}),
        O({"readout": S(), "attention_map_ref": S(), "confidence": N(min=0.0, max=1.0)}),
        ["observation_available"], ["temporal_context_available"],
        "continuous", "Target blurred; early-frame feature anchor needed", cost=15,
    ),
    card(
        "tool_action_genome", "Action Genome",
        "Infers the current physical state of objects from their motion trajectory via a spatio-temporal scene graph network.",
        "cognition", "spatio-temporal state modeling",
        ["object state", "temporal relations", "video understanding"],
        "Use when the exact object state is needed for the next-step decision.",
        O({"clip_ref": S(), "target_objects": A(S(), min=1)}),
        O({"state_graph_ref": S(), "temporal_relations": A(S())}),
        ["observation_available"], ["object_state_estimated"],
        "on_demand", "Exact object state needed for next-step decision", cost=700,
    ),
    card(
        "tool_language2ltl", "Language2LTL",
        "Translates a natural-language standard operating procedure into a formal LTL formula and rejects step-skipping or unsafe hallucinated plans before execution.",
        "reasoning", "formal verification",
        ["ltl", "safety", "plan validation", "formal methods"],
        "Use when an abstract plan is complete and its output is about to be queued for execution.",
        O({"action_plan": A(S(), min=1), "safety_formulas": A(S())}),
        O({"valid": B(), "violations": A(S())}),
        ["plan_drafted"], ["plan_verified"],
        "on_demand", "Abstract planning complete; output about to be queued", cost=350,
    ),
    card(
        "tool_lingo_space", "LINGO-Space",
        "Incrementally estimates a probability distribution over goal positions given composite spatial-referring instructions and scene geometry.",
        "reasoning", "language and intent parsing",
        ["spatial reference", "goal grounding", "probabilistic"],
        "Use when the instruction contains composite spatial referring expressions.",
        O({"instruction": S(min=1), "scene_objects": A(S())}),
        O({"location_distribution_ref": S(), "confidence": N(min=0.0, max=1.0)}),
        ["observation_available"], ["goal_position_estimated"],
        "on_demand", "Instruction contains spatial referring expressions", cost=250,
    ),
    card(
        "tool_yolo_world", "YOLO-World",
        "Real-time open-vocabulary object detector; finds arbitrary text-described objects in RGB frames.",
        "perception", "open-vocabulary detection",
        ["detection", "open vocabulary", "rgb", "real time"],
        "Use when open-vocabulary detection of a text-described object is required.",
        O({"image": IMG(), "text_query": S(min=1), "region_hint": S()},
          required=["image", "text_query"]),
        O({"target_ref": S(), "candidates": A(S()), "categories": A(S()),
           "confidence": N(min=0.0, max=1.0)}),
        ["observation_available"], ["target_localized"],
        "on_demand", "Open-vocabulary detection required", cost=40,
    ),
    card(
        "tool_fastsam", "FastSAM",
        "CNN-based real-time Segment Anything variant supporting point, box, and text prompts.",
        "perception", "segmentation and tracking",
        ["segmentation", "promptable", "real time"],
        "Use when fast instance segmentation is required.",
        O({"image": IMG(), "prompt": S(min=1), "prompt_type": E("point", "box", "text")}),
        O({"mask_refs": A(S()), "mask_count": I(min=0)}),
        ["observation_available"], ["masks_available"],
        "on_demand", "Fast instance segmentation required", cost=60,
    ),
    card(
        "tool_gigapose", "GigaPose",
        "Estimates the 6-DoF pose of known CAD-model objects via one-correspondence matching.",
        "perception", "pose and localization",
        ["pose estimation", "cad", "6dof"],
        "Use when the 6-DoF pose of a known object is needed.",
        O({"image": IMG(), "cad_template_ids": A(S(), min=1)}),
        O({"pose_ref": S(), "rotation": A(N(), min=4, max=4),
           "translation": A(N(), min=3, max=3), "confidence": N(min=0.0, max=1.0)}),
        ["observation_available", "cad_templates_available"], ["pose_estimated"],
        "on_demand", "6-DoF pose of known object needed", cost=300,
    ),
    card(
        "tool_centerpoint", "CenterPoint",
        "Center-based 3-D object detection and multi-object tracking on LiDAR point clouds.",
        "perception", "segmentation and tracking",
        ["lidar", "3d detection", "tracking"],
        "Use when 3-D detection and tracking over a point cloud is needed.",
        O({"point_cloud_ref": S(min=1)}),
        O({"boxes": A(A(N(), min=7, max=7)), "tracking_ids": A(I()),
           "velocities": A(A(N(), min=2, max=2))}),
        ["point_cloud_available"], ["objects_detected_3d"],
        "on_demand", "3-D detection and tracking needed", cost=120,
    ),
    card(
        "tool_cutie", "Cutie",
        "Video object segmentation with long-term memory; tracks and segments a target given its first-frame mask.",
        "perception", "segmentation and tracking",
        ["video segmentation", "long-term memory", "tracking"],
        "Use when a target must be tracked continuously across video frames.",
        O({"frames": A(IMG(), min=1), "initial_mask_ref": S(min=1)}),
        O({"mask_refs": A(S()), "track_ref": S()}),
        ["observation_available", "masks_available"], ["target_tracked"],
        "continuous", "Continuous video tracking needed", cost=45,
    ),
    card(
        "tool_open_fusion", "Open-Fusion",
        "Builds a real-time open-vocabulary queryable 3-D semantic field from RGB-D sequences.",
        "cognition", "scene graph and world modeling",
        ["semantic map", "rgb-d", "open vocabulary", "3d"],
        "Use when the world model needs a refresh or an open-vocabulary semantic query.",
        O({"rgbd_sequence_ref": S(), "camera_poses_ref": S(), "query": S()}),
        O({"semantic_map_ref": S(), "matches": A(S())}),
        ["observation_available"], ["semantic_map_available"],
        "continuous", "World model refresh or semantic query needed", cost=900,
    ),
    card(
        "tool_hydra", "Hydra",
        "Organises a 3-D metric map into a room-region-object hierarchy for high-level spatial reasoning.",
        "cognition", "scene graph and world modeling",
        ["scene graph", "hierarchy", "spatial reasoning"],
        "Use for high-level planning or semantic queries over a hierarchical map.",
        O({"map_ref": S(), "semantic_observations_ref": S(), "robot_poses_ref": S()}),
        O({"scene_graph_ref": S(), "region_count": I(min=0)}),
        ["semantic_map_available"], ["scene_graph_available"],
        "continuous", "High-level planning or semantic query", cost=600,
    ),
    card(
        "tool_dust3r", "DUSt3R",
        "Produces dense 3-D point maps and camera poses from an unconstrained image collection without prior calibration.",
        "perception", "depth and 3d geometry",
        ["reconstruction", "point map", "camera pose", "uncalibrated"],
        "Use when a 3-D scene must be reconstructed from unposed images.",
        O({"images": A(IMG(), min=2)}),
        O({"point_map_ref": S(), "camera_poses": A(A(N(), min=7, max=7))}),
        ["observation_available"], ["reconstruction_available"],
        "on_demand", "3-D scene reconstruction from unposed images needed", cost=2500,
    ),
    card(
        "tool_zoedepth", "ZoeDepth",
        "Estimates metric-scale depth from a single RGB image via relative-to-metric transfer; supplies geometric priors for grasping and navigation.",
        "perception", "depth and 3d geometry",
        ["depth", "metric", "monocular", "geometry"],
        "Use when no depth sensor is available and a downstream module needs geometry.",
        O({"image": IMG()}),
        O({"depth_ref": S(), "min_depth_m": N(min=0.0), "max_depth_m": N(min=0.0)}),
        ["observation_available"], ["depth_available"],
        "on_demand", "Depth sensor absent; downstream module needs geometry", cost=80,
    ),
    card(
        "tool_build_query_3d_occupancy_map", "build_query_3d_occupancy_map",
        "Fuses depth and point-cloud streams into an OctoMap octree of occupied, free, and unknown voxels for navigation and arm workspace planning.",
        "cognition", "3d map and occupancy modeling",
        ["occupancy", "octree", "voxels", "navigation"],
        "Use when a 3-D obstacle or free-space query is needed.",
        O({"depth_stream_ref": S(), "sensor_pose": A(N(), min=7, max=7),
           "resolution_m": N(min=0.001)}),
        O({"octree_ref": S(), "occupied_voxels": I(min=0), "free_voxels": I(min=0)}),
        ["depth_available"], ["occupancy_map_available"],
        "continuous", "3-D obstacle or free-space query needed", cost=150,
    ),
    card(
        "tool_tapir", "TAPIR",
        "Lightweight point tracker giving up-to-date 2-D coordinates of a displaced target to drive visual servoing.",
        "execution", "closed-loop recovery",
        ["point tracking", "visual servo", "real time"],
        "Use while the arm approaches a target that may have moved.",
        O({"query_point": A(N(), min=2, max=2), "video_stream_ref": S()}),
        O({"tracked_point": A(N(), min=2, max=2), "occluded": B()}),
        ["target_localized"], ["target_tracked"],
        "continuous", "Arm approaching target; target may have moved", cost=35,
    ),
    card(
        "tool_r3m", "R3M",
        "Scores cross-modal distance between post-action frame features and the language instruction, asserting Boolean task completion.",
        "execution", "closed-loop recovery",
        ["completion check", "representation", "verification"],
        "Use right after a discrete action such as a grasp or place.",
        O({"post_action_frame": IMG(), "goal_instruction": S(min=1)}),
        O({"completion_score": N(min=0.0, max=1.0), "completed": B()}),
        ["observation_available"], ["completion_checked"],
        "on_demand", "Discrete action (grasp, place) just executed", cost=90,
    ),
    card(
        "tool_virf_main_loop", "VIRF_Main_Loop",
        "Runs a plan-verify-diagnose-correct closed loop, invoking an LLM planner and safety verifier until a safe plan is produced or the task is rejected.",
        "execution", "closed-loop recovery",
        ["planning loop", "safety verifier", "diagnosis"],
        "Use when an embodied task instruction is received and needs a verified plan.",
        O({"instruction": S(min=1), "world_knowledge_ref": S()}),
        O({"plan": A(S()), "rejected": B(), "diagnosis": S()}),
        [], ["plan_verified"],
        "continuous", "Embodied task instruction received", cost=4000,
    ),
    card(
        "tool_anygrasp", "AnyGrasp",
        "Turns coarse 2-D semantic intent into a precise 6-DoF gripper pose from a scene point cloud.",
        "execution", "grasp planning",
        ["grasp", "6dof", "point cloud"],
        "Use when the target is locked and a physical grasp action must be generated.",
        O({"goal_pose": A(N(), min=7, max=7), "joint_state": A(N(), min=1),
           "point_cloud_ref": S()}),
        O({"grasp_pose": A(N(), min=7, max=7), "gripper_width_m": N(min=0.0),
           "confidence": N(min=0.0, max=1.0)}),
        ["point_cloud_available", "target_localized"], ["grasp_planned"],
        "on_demand", "Target locked; physical grasp action to be generated", cost=400,
    ),
    card(
        "tool_contact_graspnet", "Contact-GraspNet",
        "Regresses 6-DoF gripper poses and widths directly from a cluttered scene point cloud.",
        "execution", "grasp planning",
        ["grasp", "clutter", "point cloud", "contact"],
        "Use when dense-packing grasp planning is triggered.",
        O({"point_cloud_ref": S(min=1), "segmap_ref": S()},
          required=["point_cloud_ref"]),
        O({"grasp_poses": A(A(N(), min=7, max=7)), "widths": A(N()),
           "contact_points": A(A(N(), min=3, max=3))}),
        ["point_cloud_available"], ["grasp_planned"],
        "on_demand", "Dense-packing grasp planning triggered", cost=350,
    ),
    card(
        "tool_navigate_to_goal_pose", "navigate_to_goal_pose",
        "Converts a high-level goal pose into a navigation action stream via Nav2, handling path planning and obstacle avoidance.",
        "execution", "controller dispatch",
        ["navigation", "path planning", "nav2", "action stream"],
        "Use when a high-level navigation goal pose is provided.",
        O({"current_image": IMG(), "target_pose_hint": S(min=1),
           "robot_state": O({"base": S(), "gripper": S()}),
           "area_ref": S(), "memory_hint": S()},
          required=["current_image", "target_pose_hint", "robot_state"]),
        O({"command_ref": S(), "candidates": A(S()), "path_length_m": N(min=0.0),
           "heading_deg": N(min=-180.0, max=180.0), "action_stream": A(S())}),
        ["area_grounded"], ["path_planned"],
        "on_demand", "High-level navigation goal pose provided", cost=1200,
    ),
    card(
        "tool_plan_collision_free_manipulation", "plan_collision_free_manipulation",
        "Generates a collision-free joint trajectory for manipulation via MoveIt 2, turning a goal pose into executable waypoints.",
        "execution", "trajectory generation",
        ["manipulation", "trajectory", "collision free", "moveit"],
        "Use when a manipulation goal pose and grasp intent are available.",
        O({"goal_pose": A(N(), min=7, max=7), "robot_state_ref": S(),
           "collision_scene_ref": S()}),
        O({"trajectory_ref": S(), "waypoint_count": I(min=1)}),
        ["grasp_planned"], ["manipulation_trajectory_ready"],
        "on_demand", "Manipulation goal pose and grasp intent available", cost=800,
    ),
]

# benchmark-only tools rounding out the episode families
BENCH_EXTRA = [
    card(
        "tool_nav_scene_graph", "NavGraphGrounder",
        "Builds a language-grounded navigation scene graph from the current and recent observations and grounds a goal description to a reachable area node.",
        "cognition", "scene graph and world modeling",
        ["scene graph", "navigation", "grounding", "area"],
        "Use when a described goal area must be grounded before issuing navigation commands.",
        O({"current_image": IMG(), "history_images": A(IMG()),
           "goal_description": S(min=1), "memory_hint": S()},
          required=["current_image", "goal_description", "history_images"]),
        O({"area_ref": S(), "candidates": A(S()), "node_count": I(min=0),
           "reachability": N(min=0.0, max=1.0)}),
        ["observation_available"], ["area_grounded"],
        "on_demand", "Goal area must be grounded before navigation", cost=500,
    ),
    card(
        "tool_multi_object_pose_estimator", "PoseAligner",
        "Estimates aligned 6-DoF poses for the requested objects in the current image given their category, refining detector hypotheses for manipulation alignment.",
        "perception", "pose and localization",
        ["pose estimation", "alignment", "manipulation", "6dof"],
        "Use when detector hypotheses must be refined into aligned poses before manipulation.",
        O({"current_image": IMG(), "target_objects": A(S(), min=1),
           "object_category": S(min=1), "target_ref": S(), "depth_ref": S()},
          required=["current_image", "object_category", "target_objects"]),
        O({"pose_refs": A(S()), "pose_ref": S(), "candidates": A(S()),
           "mean_error_m": N(min=0.0)}),
        ["target_localized", "depth_available"], ["pose_estimated"],
        "on_demand", "Detector hypotheses need pose refinement for manipulation", cost=280,
    ),
    card(
        "tool_semantic_grasp_planner", "TaskGraspPlanner",
        "Plans a task-conditioned grasp for the target object from the current image, a placement goal, and the overall task goal, emitting a grasp reference with score and width.",
        "execution", "grasp planning",
        ["grasp", "task conditioned", "placement"],
        "Use when a graspable target has an estimated pose and a task-conditioned grasp is needed.",
        O({"current_image": IMG(), "target_object": S(min=1),
           "placement_goal": S(), "task_goal": S(), "pose_ref": S()},
          required=["current_image", "placement_goal", "target_object", "task_goal"]),
        O({"grasp_ref": S(), "candidates": A(S()), "grasp_score": N(min=0.0, max=1.0),
           "gripper_width_m": N(min=0.0)}),
        ["pose_estimated"], ["grasp_planned"],
        "on_demand", "Estimated pose available; task-conditioned grasp needed", cost=320,
    ),
    card(
        "tool_obstacle_replanner", "LocalMotionReplanner",
        "Replans a safe local motion around an unexpected obstacle given the current image, the blocked motion, and the goal description, returning advice and a safe motion reference.",
        "execution", "closed-loop recovery",
        ["obstacle", "replanning", "local motion", "recovery"],
        "Use when a planned motion is blocked by an unexpected obstacle.",
        O({"current_image": IMG(), "blocked_motion": S(min=1),
           "goal_description": S(min=1), "command_ref": S()},
          required=["blocked_motion", "current_image", "goal_description"]),
        O({"motion_ref": S(), "candidates": A(S()), "advice": S(),
           "clearance_m": N(min=0.0)}),
        ["path_planned"], ["path_cleared"],
        "event", "Planned motion blocked by an unexpected obstacle", cost=260,
    ),
]

CARD_FILES = {
    "tool_query_3d_scene_graph": "t01_query_3d_scene_graph",
    "tool_stm": "t02_stm",
    "tool_action_genome": "t03_action_genome",
    "tool_language2ltl": "t04_language2ltl",
    "tool_lingo_space": "t05_lingo_space",
    "tool_yolo_world": "t06_yolo_world",
    "tool_fastsam": "t07_fastsam",
    "tool_gigapose": "t08_gigapose",
    "tool_centerpoint": "t09_centerpoint",
    "tool_cutie": "t10_cutie",
    "tool_open_fusion": "t11_open_fusion",
    "tool_hydra": "t12_hydra",
    "tool_dust3r": "t13_dust3r",
    "tool_zoedepth": "t14_zoedepth",
    "tool_build_query_3d_occupancy_map": "t15_build_query_3d_occupancy_map",
    "tool_tapir": "t16_tapir",
    "tool_r3m": "t17_r3m",
    "tool_virf_main_loop": "t18_virf_main_loop",
    "tool_anygrasp": "t19_anygrasp",
    "tool_contact_graspnet": "t20_contact_graspnet",
    "tool_navigate_to_goal_pose": "t21_navigate_to_goal_pose",
    "tool_plan_collision_free_manipulation": "t22_plan_collision_free_manipulation",
    "tool_nav_scene_graph": "b01_nav_scene_graph",
    "tool_multi_object_pose_estimator": "b02_multi_object_pose_estimator",
    "tool_semantic_grasp_planner": "b03_semantic_grasp_planner",
    "tool_obstacle_replanner": "b04_obstacle_replanner",
}

# --------------------------------------------------------------------------
# filler cards: 86 synthesized tools reaching group totals 36/25/27/24

FILLER_PLAN = {
    # group -> [(subcategory, noun pool, verb phrase, count), ...]
    "perception": [
        ("open-vocabulary detection",
         ["panoptic grounding", "referring expression", "multi-scale query",
          "few-shot category", "vocabulary expansion"],
         "Detects and grounds text-described objects", 5),
        ("segmentation and tracking",
         ["amodal contour", "motion-aware instance", "panoptic video",
          "articulated part", "shadow-robust mask"],
         "Segments and tracks object instances", 5),
        ("pose and localization",
         ["category-level pose", "keypoint ensemble", "render-and-compare",
          "symmetric object", "tabletop alignment"],
         "Estimates object pose and localizes targets", 5),
        ("depth and 3d geometry",
         ["stereo rectified", "light-field", "surfel fusion",
          "self-supervised scale", "edge-preserving"],
         "Recovers depth and 3-D geometry", 5),
        ("spatial grounding",
         ["horizon anchored", "egocentric region", "gesture conditioned", "landmark relative"],
         "Grounds language references to image regions", 4),
        ("scene understanding",
         ["affordance heat", "layout prior", "material cue", "clutter profile"],
         "Summarises scene structure and affordances", 4),
    ],
    "cognition": [
        ("queryable memory",
         ["episodic replay", "object permanence", "route sketch"],
         "Stores and recalls observations on demand", 3),
        ("spatio-temporal state modeling",
         ["contact event", "liquid level", "door articulation"],
         "Models object state over time", 3),
        ("scene graph and world modeling",
         ["relation refinement", "dynamic entity", "frontier summary"],
         "Maintains a structured world model", 3),
        ("3d map and occupancy modeling",
         ["elevation grid", "traversability field", "workspace envelope"],
         "Builds and queries volumetric maps", 3),
        ("physical contact state estimation",
         ["slip signature", "grip force trend", "surface compliance"],
         "Estimates contact and force state", 3),
        ("representation embedding",
         ["cross-view patch", "instruction aligned", "tactile visual"],
         "Embeds observations for retrieval", 3),
    ],
    "reasoning": [
        ("formal verification",
         ["invariant monitor", "temporal contract", "precondition audit",
          "deadlock probe", "policy conformance"],
         "Checks plans against formal constraints", 5),
        ("tamp knowledge",
         ["stacking feasibility", "support surface", "tool substitution", "sequence repair"],
         "Answers task-and-motion planning queries", 4),
        ("active perception",
         ["next-best-view", "occlusion resolver", "viewpoint budget", "uncertainty probe"],
         "Chooses informative sensing actions", 4),
        ("navigation and motion planning",
         ["corridor heuristic", "social margin", "rough terrain", "multi-floor"],
         "Reasons over routes and motion feasibility", 4),
        ("language and intent parsing",
         ["ellipsis resolver", "ambiguity ranker", "constraint extractor", "dialogue state"],
         "Parses instructions into structured intent", 4),
        ("optimization under constraints",
         ["energy budget", "time window", "payload limit", "multi-objective"],
         "Optimises plans under resource constraints", 4),
    ],
    "execution": [
        ("inverse kinematics",
         ["redundant arm", "whole-body", "singularity aware"],
         "Solves inverse kinematics for reach targets", 3),
        ("trajectory generation",
         ["jerk limited", "retiming", "dual-arm sync"],
         "Generates executable motion trajectories", 3),
        ("force impedance control",
         ["peg insertion", "surface wipe", "compliant press"],
         "Regulates contact force during execution", 3),
        ("controller dispatch",
         ["skill arbiter", "gait switcher"],
         "Routes goals to low-level controllers", 2),
        ("closed-loop recovery",
         ["retry policy", "collision reflex"],
         "Monitors execution and recovers from faults", 2),
        ("grasp planning",
         ["suction hybrid", "deformable object"],
         "Plans grasps for special object classes", 2),
    ],
}

FILLER_ATOMS = {
    "perception": (["observation_available"], ["scene_analyzed"]),
    "cognition": (["observation_available"], ["context_modeled"]),
    "reasoning": (["plan_drafted"], ["decision_supported"]),
    "execution": (["plan_verified"], ["motion_executed"]),
}

# a few fillers get benchmark-relevant atoms to exercise candidate exclusion
FILLER_ATOM_OVERRIDES = {
    ("perception", "open-vocabulary detection", 0):
        (["observation_available"], ["target_localized"]),
    ("perception", "pose and localization", 0):
        (["target_localized", "depth_available"], ["pose_estimated"]),
    ("perception", "depth and 3d geometry", 0):
        (["observation_available"], ["depth_available"]),
    ("cognition", "queryable memory", 0):
        (["scene_memory_available"], ["target_recalled"]),
    ("cognition", "scene graph and world modeling", 0):
        (["observation_available"], ["area_grounded"]),
    ("execution", "grasp planning", 0):
        (["pose_estimated"], ["grasp_planned"]),
    ("execution", "controller dispatch", 0):
        (["area_grounded"], ["path_planned"]),
    ("execution", "closed-loop recovery", 0):
        (["path_planned"], ["path_cleared"]),
}

FILLER_INPUT_POOL = [
    O({"image": IMG(), "query": S(min=1)}),
    O({"image": IMG(), "top_k": I(min=1, max=50)}, required=["image"]),
    O({"query": S(min=1), "threshold": N(min=0.0, max=1.0)}, required=["query"]),
    O({"frames": A(IMG(), min=1), "query": S()}),
    O({"point_cloud_ref": S(min=1), "query": S()}, required=["point_cloud_ref"]),
    O({"goal": S(min=1), "constraints": A(S())}, required=["goal"]),
]

FILLER_OUTPUT_POOL = [
    O({"result_ref": S(), "score": N(min=0.0, max=1.0)}),
    O({"result_refs": A(S()), "count": I(min=0)}),
    O({"summary": S(), "confidence": N(min=0.0, max=1.0)}),
    O({"decision": B(), "rationale": S()}),
]

GROUP_MODES = {
    "perception": ["on_demand", "on_demand", "continuous"],
    "cognition": ["on_demand", "continuous", "on_demand"],
    "reasoning": ["on_demand", "on_demand", "on_demand"],
    "execution": ["on_demand", "continuous", "event"],
}


def build_fillers():
    rng = random.Random(20240521)
    cards = []
    for group, plan in FILLER_PLAN.items():
        serial = 0
        for subcategory, nouns, verb, count in plan:
            assert count <= len(nouns) + 1
            for i in range(count):
                noun = nouns[i % len(nouns)]
                slug = noun.replace("-", " ").replace(" ", "_")
                sub_slug = subcategory.split()[0].replace("-", "_")
                tool_id = f"tool_{group[:4]}_{sub_slug}_{slug}"
                name = "".join(w.capitalize() for w in noun.split()) + "Tool"
                description = (
                    f"{verb} using a {noun} strategy; tuned for "
                    f"{subcategory} workloads on embodied platforms."
                )
                require, add = FILLER_ATOM_OVERRIDES.get(
                    (group, subcategory, i), FILLER_ATOMS[group]
                )
                mode = GROUP_MODES[group][serial % 3]
                trigger = (
                    f"{subcategory} request matching the {noun} profile"
                    if mode == "event" else None
                )
                cost = rng.choice([None, 20, 60, 150, 400, 900, 2000])
                cards.append(card(
                    tool_id, name, description, group, subcategory,
                    [group, *subcategory.split()[:2], noun.split()[0]],
                    f"Use for {subcategory} when a {noun} approach fits the scene.",
                    FILLER_INPUT_POOL[serial % len(FILLER_INPUT_POOL)],
                    FILLER_OUTPUT_POOL[serial % len(FILLER_OUTPUT_POOL)],
                    require, add, mode, trigger,
                    cost=cost,
                ))
                serial += 1
    return cards


# --------------------------------------------------------------------------
# trajectory episodes

ENV_VOCAB = {
    "alfred": {
        "targets": ["pencil", "mug", "book", "apple", "knife", "plate", "remote",
                    "keychain", "soap bar", "tomato", "spray bottle", "credit card",
                    "watch"],
        "places": ["desk", "kitchen counter", "shelf", "dining table", "sink",
                   "cabinet", "sofa", "side table", "bathroom counter", "fridge",
                   "laundry shelf", "dresser", "nightstand"],
        "rooms": ["bedroom", "kitchen", "living room", "bathroom"],
        "families": ["detect", "pose", "grasp"],
        "instruction": [
            "put the {t} in the drawer under the {p}",
            "grasp the {t} and place it on the {p}",
            "locate the {t} and move it to the {p}",
            "carry the {t} over to the {p}",
            "detect the {t} on the {p} and put it away",
            "bring the {t} from the {p} to the table",
        ],
    },
    "habitat": {
        "targets": ["blue armchair", "potted plant", "floor lamp", "coffee table",
                    "wall clock", "bookshelf", "laundry basket", "piano stool",
                    "bar cart", "standing mirror", "shoe rack", "radiator",
                    "window bench"],
        "places": ["living room", "hallway", "study", "kitchen", "balcony",
                   "dining room", "entryway", "bedroom", "laundry room", "office",
                   "den", "pantry", "stairwell"],
        "rooms": ["apartment entry", "corridor", "lounge"],
        "families": ["memory", "graph", "nav"],
        "instruction": [
            "go to the {t} in the {p}",
            "navigate to the {t} near the {p}",
            "find your way back to the {t} by the {p}",
            "head over to the {t} inside the {p}",
            "locate the {t} in the {p} and stop next to it",
            "walk to the {t} at the {p}",
        ],
    },
    "navigation": {
        "targets": ["loading dock", "charging station", "elevator bank",
                    "reception desk", "supply closet", "fire exit", "mail room",
                    "conference room", "server rack", "water cooler",
                    "security booth", "stock shelf", "tool crib"],
        "places": ["warehouse floor", "north wing", "basement", "mezzanine",
                   "east corridor", "annex", "yard", "lobby", "dispatch area",
                   "workshop", "cold storage", "archive", "garage"],
        "rooms": ["depot entrance", "main aisle", "service corridor"],
        "families": ["graph", "nav", "avoid"],
        "instruction": [
            "deliver the parcel to the {t} in the {p}",
            "navigate to the {t} across the {p}",
            "patrol route ends at the {t} near the {p}",
            "drive to the {t} through the {p}",
            "locate the {t} in the {p} and wait there",
            "proceed to the {t} by way of the {p}",
        ],
    },
    "manipulation": {
        "targets": ["torque wrench", "circuit board", "glue stick", "usb cable",
                    "test tube", "ball bearing", "hex nut", "solder spool",
                    "filter cartridge", "rubber gasket", "label roll",
                    "sample vial", "spring clamp"],
        "places": ["workbench", "assembly line", "parts bin", "inspection tray",
                   "conveyor belt", "tool wall", "fixture plate", "storage rack",
                   "packing station", "lab bench", "kit cart", "staging area",
                   "calibration rig"],
        "rooms": ["assembly cell", "lab", "packing bay"],
        "families": ["detect", "pose", "grasp"],
        "instruction": [
            "install the {t} from the {p}",
            "grasp the {t} on the {p} and hand it over",
            "pick the {t} out of the {p}",
            "detect the {t} at the {p} and sort it",
            "move the {t} from the {p} into the bin",
            "segment the {t} pile on the {p} and pick one",
        ],
    },
}

ENV_INIT_STATE = {
    "alfred": ["observation_available", "depth_available", "scene_memory_available"],
    "habitat": ["observation_available", "scene_memory_available"],
    "navigation": ["observation_available", "scene_memory_available"],
    "manipulation": ["observation_available", "depth_available"],
}

# family -> (tool_id, add atom)
FAMILY_TOOL = {
    "detect": ("tool_yolo_world", "target_localized"),
    "pose": ("tool_multi_object_pose_estimator", "pose_estimated"),
    "grasp": ("tool_semantic_grasp_planner", "grasp_planned"),
    "memory": ("tool_query_3d_scene_graph", "target_recalled"),
    "graph": ("tool_nav_scene_graph", "area_grounded"),
    "nav": ("tool_navigate_to_goal_pose", "path_planned"),
    "avoid": ("tool_obstacle_replanner", "path_cleared"),
}

FAMILY_REF = {
    "detect": "det", "pose": "pose", "grasp": "grasp", "memory": "mem",
    "graph": "area", "nav": "cmd", "avoid": "mot",
}

FALLBACK_ACTION_TYPE = {
    "detect": "explore_viewpoint",
    "pose": "inspect_target_area",
    "grasp": "reposition_gripper",
    "memory": "search_area",
    "graph": "scan_surroundings",
    "nav": "move_toward_landmark",
    "avoid": "wait_and_retry",
}

GOLD_ACTION_TYPE = {
    "detect": "ground_target_and_continue",
    "pose": "align_manipulation_with_pose",
    "grasp": "execute_grasp",
    "memory": "navigate_to_recovered_location",
    "graph": "navigate_to_grounded_area",
    "nav": "execute_navigation_command",
    "avoid": "execute_safe_local_motion",
}

# 1x1 transparent PNG
PNG_BYTES = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c489"
    "0000000d4944415478da63faffff3f0300050201004c8f7eb10000000049454e44"
    "ae426082"
)


def refs(ep, family):
    tag = FAMILY_REF[family]
    return [f"{ep}_{tag}_{letter}" for letter in "abc"]


def gold_call_for(family, ep, idx, target, place, instruction, obs):
    if family == "detect":
        return {"image": obs, "text_query": target}
    if family == "pose":
        return {"current_image": obs, "target_objects": [target],
                "object_category": "household_object"}
    if family == "grasp":
        return {"current_image": obs, "target_object": target,
                "placement_goal": f"place the {target} on the {place}",
                "task_goal": instruction}
    if family == "memory":
        return {"scene_graph": "scene_memory", "object_query": target,
                "relation_query": "location"}
    if family == "graph":
        prev = f"images/{ep}/step_{idx - 1:02d}.png"
        return {"current_image": obs, "history_images": [prev],
                "goal_description": f"the {place} holding the {target}"}
    if family == "nav":
        return {"current_image": obs, "target_pose_hint": f"near the {target}",
                "robot_state": {"base": "current_pose", "gripper": "unchanged"}}
    if family == "avoid":
        return {"current_image": obs, "blocked_motion": "forward_translation",
                "goal_description": f"the {place} holding the {target}"}
    raise AssertionError(family)


def gold_output_for(family, ep, target, place, rng):
    cand = refs(ep, family)
    top = cand[2]
    if family == "detect":
        return {"target_ref": top, "candidates": cand,
                "categories": [target, target, target],
                "confidence": round(rng.uniform(0.85, 0.97), 2)}
    if family == "pose":
        return {"pose_refs": [cand[0], top], "pose_ref": top, "candidates": cand,
                "mean_error_m": round(rng.uniform(0.004, 0.02), 3)}
    if family == "grasp":
        return {"grasp_ref": top, "candidates": cand,
                "grasp_score": round(rng.uniform(0.75, 0.95), 2),
                "gripper_width_m": round(rng.uniform(0.02, 0.09), 3)}
    if family == "memory":
        return {"memory_ref": top, "candidates": cand,
                "location": f"last seen on the {place}",
                "neighbor_relations": [f"next to the {target}"],
                "confidence": round(rng.uniform(0.8, 0.95), 2)}
    if family == "graph":
        return {"area_ref": top, "candidates": cand,
                "node_count": rng.randint(6, 24),
                "reachability": round(rng.uniform(0.7, 0.98), 2)}
    if family == "nav":
        return {"command_ref": top, "candidates": cand,
                "path_length_m": round(rng.uniform(1.5, 9.0), 1),
                "heading_deg": float(rng.choice([-90, -45, 0, 45, 90, 135])),
                "action_stream": ["forward", "left", "forward"]}
    if family == "avoid":
        return {"motion_ref": top, "candidates": cand,
                "advice": f"back up and pass the blockage on the left toward the {place}",
                "clearance_m": round(rng.uniform(0.2, 0.8), 2)}
    raise AssertionError(family)


def gold_ref_key(family):
    return {"detect": "target_ref", "pose": "pose_refs", "grasp": "grasp_ref",
            "memory": "memory_ref", "graph": "area_ref", "nav": "command_ref",
            "avoid": "motion_ref"}[family]


def gold_action_for(family, ep, target, output):
    key = gold_ref_key(family)
    return {"action_type": GOLD_ACTION_TYPE[family], "target": target,
            "reference": {key: output[key]}}


def fallback_action_for(family, target):
    return {"action_type": FALLBACK_ACTION_TYPE[family], "target": target,
            "reference": {}}


NEGATIVE_STEPS = [
    ("direct", "walk past the {p} toward the goal",
     "Motion completed without incident."),
    ("tool_redundant", "the {t} is directly in front of you; reach out and touch it",
     "The {t} is clearly visible at arm's length."),
    ("direct", "turn around and face the {p}",
     "Now facing the {p}."),
    ("tool_redundant", "the path ahead is open; keep moving forward",
     "Forward motion is unobstructed."),
]


def build_episode(ep_num, env, ep_index):
    vocab = ENV_VOCAB[env]
    ep = f"u{ep_num:03d}"
    rng = random.Random(ep_num * 7919)
    target = vocab["targets"][ep_index]
    place = vocab["places"][ep_index]
    room = vocab["rooms"][ep_index % len(vocab["rooms"])]
    instruction = vocab["instruction"][ep_index % 6].format(t=target, p=place)
    difficulty = ("easy", "easy", "medium", "easy", "hard", "medium", "easy",
                  "medium", "easy", "hard", "easy", "medium", "easy")[ep_index]
    families = vocab["families"]
    init = list(ENV_INIT_STATE[env])

    steps = []
    state = set(init)
    neg_cycle = 0
    for idx in range(7):
        obs = f"images/{ep}/step_{idx:02d}.png"
        positive = idx in (2, 4, 6)
        if positive:
            family = families[(2, 4, 6).index(idx)]
            tool_id, atom = FAMILY_TOOL[family]
            call_args = gold_call_for(family, ep, idx, target, place, instruction, obs)
            output = gold_output_for(family, ep, target, place, rng)
            action = gold_action_for(family, ep, target, output)
            steps.append({
                "index": idx,
                "observation": obs,
                "state": sorted(state),
                "sampleable": True,
                "action_description": f"resolve the {target} with {tool_id} before acting",
                "env_feedback": "Awaiting tool-assisted decision.",
                "last_action_success": True,
                "needs_tool": True,
                "gold_call": {"tool_id": tool_id, "arguments": call_args},
                "gold_output": output,
                "gold_action": action,
                "fallback_action": fallback_action_for(family, target),
                "goal_atom": atom,
                "negative_kind": None,
            })
            state.add(atom)
        else:
            kind, desc_tpl, fb_tpl = NEGATIVE_STEPS[neg_cycle % len(NEGATIVE_STEPS)]
            neg_cycle += 1
            if idx == 0:
                desc = f"enter the {room} and look around"
                feedback = f"You are in the {room}."
                kind = "context"
            else:
                desc = desc_tpl.format(t=target, p=place)
                feedback = fb_tpl.format(t=target, p=place)
            steps.append({
                "index": idx,
                "observation": obs,
                "state": sorted(state),
                "sampleable": idx in (3, 5),
                "action_description": desc,
                "env_feedback": feedback,
                "last_action_success": True,
                "needs_tool": False,
                "gold_call": None,
                "gold_output": None,
                "gold_action": {"action_type": "continue_plan", "target": target,
                                "reference": {}},
                "fallback_action": None,
                "goal_atom": None,
                "negative_kind": kind,
            })

    chains = build_chains(ep, env, families, init)
    return {
        "episode_id": ep,
        "env": env,
        "difficulty": difficulty,
        "instruction": instruction,
        "initial_state": sorted(init),
        "steps": steps,
        "chains": chains,
    }


def build_chains(ep, env, families, init):
    primary_tools = [FAMILY_TOOL[f][0] for f in families]
    if families == ["detect", "pose", "grasp"]:
        primary_bindings = [
            {"producer": "tool_yolo_world", "output_field": "target_ref",
             "consumer": "tool_multi_object_pose_estimator", "input_field": "target_ref"},
            {"producer": "tool_multi_object_pose_estimator", "output_field": "pose_ref",
             "consumer": "tool_semantic_grasp_planner", "input_field": "pose_ref"},
        ]
        goal = "grasp_planned"
        alt_tools = ["tool_yolo_world", "tool_zoedepth",
                     "tool_multi_object_pose_estimator"]
        alt_bindings = [
            {"producer": "tool_yolo_world", "output_field": "target_ref",
             "consumer": "tool_multi_object_pose_estimator", "input_field": "target_ref"},
            {"producer": "tool_zoedepth", "output_field": "depth_ref",
             "consumer": "tool_multi_object_pose_estimator", "input_field": "depth_ref"},
        ]
        alt_init = ["observation_available"]
        alt_goal = "pose_estimated"
        if env == "manipulation":
            alt_tools = alt_tools + ["tool_semantic_grasp_planner"]
            alt_bindings = alt_bindings + [
                {"producer": "tool_multi_object_pose_estimator", "output_field": "pose_ref",
                 "consumer": "tool_semantic_grasp_planner", "input_field": "pose_ref"},
            ]
            alt_goal = "grasp_planned"
    elif families == ["memory", "graph", "nav"]:
        primary_bindings = [
            {"producer": "tool_query_3d_scene_graph", "output_field": "memory_ref",
             "consumer": "tool_nav_scene_graph", "input_field": "memory_hint"},
            {"producer": "tool_nav_scene_graph", "output_field": "area_ref",
             "consumer": "tool_navigate_to_goal_pose", "input_field": "area_ref"},
        ]
        goal = "path_planned"
        alt_tools = ["tool_query_3d_scene_graph", "tool_nav_scene_graph",
                     "tool_navigate_to_goal_pose"]
        alt_bindings = [
            {"producer": "tool_query_3d_scene_graph", "output_field": "memory_ref",
             "consumer": "tool_navigate_to_goal_pose", "input_field": "memory_hint"},
            {"producer": "tool_nav_scene_graph", "output_field": "area_ref",
             "consumer": "tool_navigate_to_goal_pose", "input_field": "area_ref"},
        ]
        alt_init = ["observation_available", "scene_memory_available"]
        alt_goal = "path_planned"
    elif families == ["graph", "nav", "avoid"]:
        primary_bindings = [
            {"producer": "tool_nav_scene_graph", "output_field": "area_ref",
             "consumer": "tool_navigate_to_goal_pose", "input_field": "area_ref"},
            {"producer": "tool_navigate_to_goal_pose", "output_field": "command_ref",
             "consumer": "tool_obstacle_replanner", "input_field": "command_ref"},
        ]
        goal = "path_cleared"
        alt_tools = ["tool_query_3d_scene_graph", "tool_nav_scene_graph",
                     "tool_navigate_to_goal_pose"]
        alt_bindings = [
            {"producer": "tool_query_3d_scene_graph", "output_field": "memory_ref",
             "consumer": "tool_navigate_to_goal_pose", "input_field": "memory_hint"},
            {"producer": "tool_nav_scene_graph", "output_field": "area_ref",
             "consumer": "tool_navigate_to_goal_pose", "input_field": "area_ref"},
        ]
        alt_init = ["observation_available", "scene_memory_available"]
        alt_goal = "path_planned"
    else:
        raise AssertionError(families)
    return [
        {"chain_id": f"{ep}_chain_0", "kind": "primary", "tools": primary_tools,
         "bindings": primary_bindings, "initial_state": sorted(init),
         "goal_atom": goal, "start_index": 2},
        {"chain_id": f"{ep}_chain_1", "kind": "alternate", "tools": alt_tools,
         "bindings": alt_bindings, "initial_state": sorted(alt_init),
         "goal_atom": alt_goal, "start_index": 2},
    ]


# --------------------------------------------------------------------------

def write_golden(cards_by_id):
    golden = FIXTURES / "golden"
    golden.mkdir(parents=True, exist_ok=True)

    requests = {
        "ping": {},
        "list_tools": {},
        "discover": {"group": "perception", "tags_any": ["detection"]},
        "invoke": {
            "tool_id": "tool_yolo_world",
            "query": {"image": "images/u001/step_02.png", "text_query": "pencil"},
            "timeout_ms": 5000,
            "seed": 7,
        },
        "session_status": {"session_id": "s-000001"},
        "cancel": {"session_id": "s-000001"},
        "register": {"card": cards_by_id["tool_zoedepth"]},
        "deregister": {"tool_id": "tool_zoedepth"},
    }
    for i, (method, params) in enumerate(sorted(requests.items()), start=1):
        frame = frame_encode({"id": f"g{i:06d}", "method": method, "params": params})
        (golden / f"request_{method}.frame").write_bytes(frame)

    (golden / "response_ping.frame").write_bytes(
        frame_encode({"id": "g000006", "ok": True, "result": {"pong": True}})
    )
    (golden / "response_bad_frame.frame").write_bytes(
        frame_encode({"id": "", "ok": False,
                      "error": {"code": "BAD_FRAME", "message": "frame is not valid JSON"}})
    )

    # deterministic invoke transcript: counting clock + fixed session ids
    registry = Registry()
    for doc in cards_by_id.values():
        registry.register(parse_card(doc))
    counter = iter(range(1, 100))
    engine = ExecutionEngine(
        registry.snapshot(),
        clock=CountingClock(start=1000, step=10),
        session_id_factory=lambda: f"s-{next(counter):06d}",
    )
    fixture = json.loads((FIXTURES / "trajectories" / "u001.json").read_text())
    step = fixture["steps"][2]
    engine.register_mock_executor(
        "tool_yolo_world",
        {canonical_dumps(step["gold_call"]["arguments"]): step["gold_output"]},
    )
    record = engine.invoke(
        "tool_yolo_world", step["gold_call"]["arguments"], timeout_ms=5000, seed=7
    )
    assert record.status == "completed", record.to_json()
    body = record.to_json(stable=False)
    (golden / "response_invoke.frame").write_bytes(
        frame_encode({"id": "g000004", "ok": True, "result": {"session": body}})
    )


def main():
    cards = CATALOGUE + BENCH_EXTRA
    fillers = build_fillers()
    all_cards = cards + fillers
    assert len(cards) == 26 and len(all_cards) == 112, (len(cards), len(all_cards))

    by_group = {}
    for doc in all_cards:
        by_group.setdefault(doc["capability"]["group"], []).append(doc)
    counts = {g: len(v) for g, v in sorted(by_group.items())}
    assert counts == {"cognition": 25, "execution": 24,
                      "perception": 36, "reasoning": 27}, counts

    parsed = {}
    for doc in all_cards:
        card_obj = parse_card(doc)  # raises on any malformed fixture
        assert card_obj.tool_id not in parsed, card_obj.tool_id
        parsed[card_obj.tool_id] = card_obj

    cards_dir = FIXTURES / "cards"
    cards_dir.mkdir(parents=True, exist_ok=True)
    for old in cards_dir.glob("*.json"):
        old.unlink()
    for doc in cards:
        path = cards_dir / f"{CARD_FILES[doc['tool_id']]}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    registry_docs = sorted(all_cards, key=lambda d: d["tool_id"])
    (FIXTURES / "registry_112.json").write_text(
        canonical_dumps(registry_docs) + "\n"
    )

    traj_dir = FIXTURES / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    for old in traj_dir.glob("*.json"):
        old.unlink()
    envs = ["alfred", "habitat", "navigation", "manipulation"]
    ep_num = 0
    episodes = []
    for env_idx, env in enumerate(envs):
        for ep_index in range(13):
            ep_num += 1
            episode = build_episode(ep_num, env, ep_index)
            episodes.append(episode)
            (traj_dir / f"{episode['episode_id']}.json").write_text(
                canonical_dumps(episode) + "\n"
            )
            img_dir = traj_dir / "images" / episode["episode_id"]
            img_dir.mkdir(parents=True, exist_ok=True)
            for idx in range(7):
                (img_dir / f"step_{idx:02d}.png").write_bytes(PNG_BYTES)

    # sanity: every chain derives a nonempty acyclic constraint set and every
    # tool step's preconditions hold in its recorded pre-state
    from etp.toolchain import Binding as TBinding, ChainSpec, plan_order

    for episode in episodes:
        for step in episode["steps"]:
            if step["gold_call"] is None:
                continue
            tool = parsed[step["gold_call"]["tool_id"]]
            state = frozenset(step["state"])
            missing = tool.preconditions.require - state
            assert not missing, (episode["episode_id"], step["index"], missing)
        for chain in episode["chains"]:
            bindings = tuple(TBinding.from_json(b) for b in chain["bindings"])
            constraints = derive_constraints(
                [parsed[tid] for tid in chain["tools"]], bindings
            )
            assert constraints, chain["chain_id"]
            spec = ChainSpec(
                gold_set=frozenset(chain["tools"]),
                constraints=constraints,
                bindings=bindings,
            )
            plan_order(spec, seed=0)  # raises on cycle

    cards_json = {doc["tool_id"]: doc for doc in all_cards}
    write_golden(cards_json)

    print(f"wrote {len(cards)} card files, registry of {len(all_cards)}, "
          f"{len(episodes)} trajectories")


if __name__ == "__main__":
    main()
