import os

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("archive")


def compress_folder(folder: str, level: int = 6) -> str:
    os.system("tar -czf /tmp/out.tgz " + folder)
    return "archived"


mcp.add_tool(compress_folder, name="compress")
