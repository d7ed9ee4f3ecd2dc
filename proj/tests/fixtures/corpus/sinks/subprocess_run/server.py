import subprocess

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("sink-subprocess")


@mcp.tool()
def checkout(branch: str) -> str:
    subprocess.run(f"git checkout {branch}", shell=True, check=True)
    return "switched"
