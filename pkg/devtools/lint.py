import subprocess
import sys

from funlog import log_calls
from rich import get_console, reconfigure
from rich import print as rprint

SRC_PATHS = ["src", "tests", "devtools", "scripts"]
DOC_PATHS = ["README.md", "development.md", "docs"]

# (label, command) in the order they run; ruff fixes before the type check sees the code.
STEPS = [
    ("spelling", ["codespell", "--write-changes", *SRC_PATHS, *DOC_PATHS]),
    ("ruff check", ["ruff", "check", "--fix", *SRC_PATHS]),
    ("ruff format", ["ruff", "format", *SRC_PATHS]),
    ("types", ["basedpyright", "--stats", *SRC_PATHS]),
]


reconfigure(emoji=not get_console().options.legacy_windows)  # No emojis on legacy windows.


def main(argv: list[str] | None = None) -> int:
    only = set(sys.argv[1:] if argv is None else argv)
    rprint()

    failed = []
    for label, cmd in STEPS:
        if only and label.split()[0] not in only:
            continue
        if run(cmd) != 0:
            failed.append(label)

    rprint()
    if failed:
        rprint(f"[bold red]:x: Lint failed: {', '.join(failed)}.[/bold red]")
    else:
        rprint("[bold green]:white_check_mark: Lint passed![/bold green]")
    rprint()

    return len(failed)


@log_calls(level="warning", show_timing_only=True)
def run(cmd: list[str]) -> int:
    rprint()
    rprint(f"[bold green]>> {' '.join(cmd)}[/bold green]")
    try:
        subprocess.run(cmd, text=True, check=True)
    except KeyboardInterrupt:
        rprint("[yellow]Keyboard interrupt - Cancelled[/yellow]")
        return 1
    except subprocess.CalledProcessError as e:
        rprint(f"[bold red]Error: {e}[/bold red]")
        return 1
    return 0


if __name__ == "__main__":
    exit(main())
