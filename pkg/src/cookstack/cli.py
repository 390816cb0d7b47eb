"""cookctl: run the service, drive simulated probes, talk to the assistant.

Exit codes: 0 success, 1 scenario assertion failure, 2 usage/config problem,
3 transport failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
import urllib.error
import urllib.request

from . import doneness
from .config import ConfigError, load_config, parse_addr
from .gateway import AssistantGateway
from .httpapi import ControlPlaneServer
from .scenario import ScenarioError, run_scenario_file
from .simulator import ProbeConnection, ThermalParams, TransportError, run

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2
EXIT_TRANSPORT = 3

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cookctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the control plane and assistant")
    serve.add_argument("--config", required=True, help="path to the JSON service config")

    sim = sub.add_parser("simulate", help="stream a simulated probe at a running server")
    sim.add_argument("--device", required=True, help="device id to announce")
    sim.add_argument("--t0", type=float, required=True, help="initial food temperature, F")
    sim.add_argument("--env", type=float, required=True, help="heat source temperature, F")
    sim.add_argument("--k", type=float, required=True, help="heating coefficient, 1/s")
    sim.add_argument("--cadence", type=float, required=True, help="seconds between samples")
    sim.add_argument("--duration", type=float, required=True, help="simulated cook length, s")
    sim.add_argument("--server", required=True, help="telemetry listener, host:port")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noise", type=float, default=0.0, help="sensor noise sigma, F")
    sim.add_argument("--realtime", action="store_true", help="sleep one cadence between samples")

    say = sub.add_parser("say", help="send one utterance to the assistant")
    say.add_argument("--token", required=True, help="access token for the thermometer")
    say.add_argument("--server", required=True, help="HTTP API, host:port or full URL")
    say.add_argument("text", help="the utterance")

    scenario = sub.add_parser("scenario", help="run a scripted end-to-end scenario file")
    scenario.add_argument("path", help="scenario JSON file")

    kb = sub.add_parser("kb", help="query the doneness knowledge base")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)
    classify = kb_sub.add_parser("classify", help="name the doneness band for a temperature")
    classify.add_argument("--category", required=True, choices=doneness.CATEGORY_IDS)
    classify.add_argument("--temp", type=float, required=True, help="temperature, F")
    return parser


def cmd_serve(args) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        server = ControlPlaneServer(cfg)
    except OSError as e:
        print(f"cannot bind listeners: {e}", file=sys.stderr)
        return EXIT_USAGE
    gateway = AssistantGateway(server.base_url)
    server.attach_assistant(gateway.handle_dict)
    server.start()
    print(f"telemetry listening on {server.telemetry_address[0]}:{server.telemetry_address[1]}", flush=True)
    print(f"http api listening on {server.base_url}", flush=True)
    if cfg.ui_dir:
        print(f"dashboard at {server.base_url}/ui/", flush=True)
    try:
        while not stop.wait(0.2):
            pass
    except KeyboardInterrupt:
        pass
    server.stop()
    print("shut down cleanly")
    return EXIT_OK


def cmd_simulate(args) -> int:
    logging.basicConfig(level=logging.WARNING)
    try:
        host, port = parse_addr(args.server, "--server")
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    try:
        params = ThermalParams(t0_f=args.t0, env_f=args.env, k_per_s=args.k,
                               noise_sigma_f=args.noise, seed=args.seed)
    except ValueError as e:
        print(f"bad thermal parameters: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.cadence <= 0 or args.duration < 0:
        print("cadence must be positive and duration non-negative", file=sys.stderr)
        return EXIT_USAGE
    try:
        probe = ProbeConnection(host, port, args.device)
    except OSError as e:
        print(f"cannot connect to {host}:{port}: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    try:
        final = run(
            params, args.cadence, args.duration,
            sink=probe.send_sample,
            device_id=args.device,
            commands=probe.drain_commands,
            realtime=args.realtime,
        )
    except TransportError as e:
        print(f"telemetry connection lost: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    finally:
        probe.close()
    print(f"device {final.device_id}: {int(args.duration // args.cadence)} samples sent")
    print(f"  current {final.current_f:.1f}F  target {final.target_f:.1f}F  elapsed {final.elapsed_s:.0f}s")
    print(f"  alarm armed={final.alarm_armed} fired={final.alarm_fired}")
    return EXIT_OK


def cmd_say(args) -> int:
    base = args.server if args.server.startswith("http") else f"http://{args.server}"
    payload = json.dumps({"text": args.text, "token": args.token, "session_id": "cookctl"}).encode()
    request = urllib.request.Request(
        base.rstrip("/") + "/api/assistant/utterance",
        data=payload, headers={"Content-Type": "application/json"}, method="POST",
    )
    try:
        with urllib.request.urlopen(request, timeout=10.0) as resp:
            body = json.loads(resp.read())
    except (urllib.error.URLError, OSError, TimeoutError) as e:
        print(f"cannot reach assistant: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    print(body.get("speech", ""))
    return EXIT_OK


def cmd_scenario(args) -> int:
    try:
        report = run_scenario_file(args.path)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        print(f"scenario run failed: {e}", file=sys.stderr)
        return EXIT_ASSERTION
    for r in report.results:
        mark = "PASS" if r.passed else "FAIL"
        line = f"{mark} [{r.at_s:>6.0f}s] {r.label}"
        if not r.passed and r.detail:
            line += f"\n      {r.detail}"
        print(line)
    failed = sum(1 for r in report.results if not r.passed)
    print(f"{report.name}: {len(report.results) - failed}/{len(report.results)} assertions passed")
    return EXIT_OK if report.passed else EXIT_ASSERTION


def cmd_kb_classify(args) -> int:
    table = doneness.load_default_table()
    entry = table.classify(args.category, args.temp)
    category = table.category(args.category)
    if entry is None:
        print(f"{args.temp:.1f}F is below every {category.display_name} band (not yet safe)")
        return EXIT_OK
    if entry.lower_f is None:
        bounds = f"below {entry.upper_f:.0f}F"
    elif entry.upper_f is None:
        bounds = f"{entry.lower_f:.0f}F and up"
    else:
        bounds = f"{entry.lower_f:.0f}-{entry.upper_f:.0f}F"
    print(f"{entry.name} ({bounds}): {entry.description}")
    print(f"USDA recommended minimum: {category.usda_minimum_f:.0f}F"
          + (f" {category.usda_note}" if category.usda_note else ""))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "say":
        return cmd_say(args)
    if args.command == "scenario":
        return cmd_scenario(args)
    if args.command == "kb":
        return cmd_kb_classify(args)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
