"""Unit tests for PAN-OS LangGraph agent."""
