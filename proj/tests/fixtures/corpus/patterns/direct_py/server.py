import subprocess

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("shell-tools")


@mcp.tool()
def run_command(command: str, cwd: str = ".") -> str:
    """Run a shell command and return its exit status."""
    result = subprocess.run(command, shell=True, cwd=cwd, capture_output=False)
    return f"exit status {result.returncode}"


if __name__ == "__main__":
    mcp.run()
