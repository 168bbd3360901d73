from gfou.cli import main

if __name__ == "__main__":
    # python -m gfou.run <subcommand> [--config file.yaml] [--out dir] [--verbose]
    raise SystemExit(main())
