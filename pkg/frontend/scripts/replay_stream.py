"""Replay a recorded stream file over a real event-stream endpoint.

Used by the dashboard's live integration test: prints the bound port, waits
for one subscriber, replays every line, then shuts down.

    python3 replay_stream.py path/to/stream.ndjson
"""

import json
import sys
import time

from egressaudit.events import EventStreamServer


def main() -> int:
    path = sys.argv[1]
    server = EventStreamServer(port=0).start()
    print(f"PORT {server.port}", flush=True)
    try:
        deadline = time.time() + 15
        while server.subscriber_count == 0:
            if time.time() > deadline:
                print("NO SUBSCRIBER", flush=True)
                return 1
            time.sleep(0.02)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    server.publish(json.loads(line))
                    time.sleep(0.002)
        time.sleep(0.3)  # let the last frames drain before tearing down
        print("DONE", flush=True)
        return 0
    finally:
        server.stop()


if __name__ == "__main__":
    sys.exit(main())
