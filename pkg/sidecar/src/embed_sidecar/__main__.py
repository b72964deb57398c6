import argparse

from .models import ModelSpec, load_model
from .server import create_app


def parse_model(arg: str) -> ModelSpec:
    if "=" not in arg:
        raise argparse.ArgumentTypeError(
            f"--model takes NAME=PATH, got {arg!r}")
    name, path = arg.split("=", 1)
    return ModelSpec(name=name, path=path)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-sidecar",
        description="Serve token-level and pooled embeddings over HTTP.")
    parser.add_argument("--model", action="append", type=parse_model,
                        required=True, metavar="NAME=PATH",
                        help="checkpoint to load (repeatable)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8008)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-concurrency", type=int, default=2)
    parser.add_argument("--trust-remote-code", action="store_true",
                        help="needed by some checkpoints (e.g. jina, nomic)")
    args = parser.parse_args(argv)

    registry = {}
    for spec in args.model:
        spec.device = args.device
        spec.trust_remote_code = args.trust_remote_code
        registry[spec.name] = load_model(spec)
        loaded = registry[spec.name]
        print(f"loaded {spec.name}: dims={loaded.dims} "
              f"window={loaded.window} from {spec.path}")

    import uvicorn

    uvicorn.run(create_app(registry, max_concurrency=args.max_concurrency),
                host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
