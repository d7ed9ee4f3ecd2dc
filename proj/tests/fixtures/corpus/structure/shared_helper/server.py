import subprocess

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("vcs")


def run_git(arguments: str) -> int:
    completed = subprocess.run("git " + arguments, shell=True)
    return completed.returncode


@mcp.tool()
def git_fetch(remote: str) -> str:
    code = run_git("fetch " + remote)
    return f"fetch exited {code}"


@mcp.tool()
def git_tag(tag: str) -> str:
    code = run_git("tag " + tag)
    return f"tag exited {code}"
