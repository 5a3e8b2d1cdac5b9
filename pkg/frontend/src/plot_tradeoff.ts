#!/usr/bin/env node
import { runTradeoff } from "./tradeoff";

process.exit(runTradeoff(process.argv.slice(2)));
