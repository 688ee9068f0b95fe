"""Replay runner: drive episode feeds against a live server.

Exit codes: 0 on success, 1 on usage errors, 2 when the feed is unreadable,
3 when the connection failed or dropped (trace marked truncated).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .client import ConnectFailure, connect
from .loop import agent_loop, replay_decision_fn


def _load_feed(paths: list[str], episodes: list[str] | None) -> list[dict]:
    feed = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files = sorted(p for p in path.glob("*.json") if p.is_file())
        else:
            files = [path]
        for file in files:
            episode = json.loads(file.read_text(encoding="utf-8"))
            if episodes and episode.get("episode_id") not in episodes:
                continue
            feed.append(episode)
    return feed


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="etp-client",
        description="Replay episode feeds against a remote tool server.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("replay", help="replay gold decisions from a feed")
    p.add_argument("--feed", nargs="+", required=True,
                   help="episode JSON files or directories of them")
    p.add_argument("--out", required=True, help="trace JSONL destination")
    p.add_argument("--addr", help="server host:port (default $ETP_ADDR)")
    p.add_argument("--episodes", nargs="*", help="episode ids to keep")
    args = parser.parse_args(argv)

    try:
        feed = _load_feed(args.feed, args.episodes)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"etp-client: cannot read feed: {exc}", file=sys.stderr)
        return 2
    if not feed:
        print("etp-client: feed selected no episodes", file=sys.stderr)
        return 2

    try:
        client = connect(args.addr)
    except ConnectFailure as exc:
        print(f"etp-client: {exc}", file=sys.stderr)
        return 3
    with client:
        result = agent_loop(client, replay_decision_fn, feed, args.out)
    print(f"wrote {result.rows} rows over {result.episodes} episodes to {result.path}")
    if result.truncated:
        print(f"etp-client: trace truncated: {result.error}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
