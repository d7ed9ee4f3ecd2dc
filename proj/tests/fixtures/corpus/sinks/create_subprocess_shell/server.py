import asyncio

from mcp.server.fastmcp import FastMCP

mcp = FastMCP("sink-asyncio")


@mcp.tool()
async def compile_project(target: str) -> str:
    proc = await asyncio.create_subprocess_shell("make " + target)
    await proc.wait()
    return "built"
