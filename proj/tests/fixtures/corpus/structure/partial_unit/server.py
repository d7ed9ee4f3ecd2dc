from mcp.server.fastmcp import FastMCP

mcp = FastMCP("partial")


def numbers(limit):
    for i in range(limit):
        yield i


@mcp.tool()
def greet(name: str) -> str:
    return "hello " + name
